#include "e2v/dataset.hpp"
#include "e2v/error.hpp"
#include "e2v/http.hpp"
#include "e2v/pipeline.hpp"
#include "e2v/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  bool force = false;
  bool json_out = false;
};

struct Overrides {
  std::optional<std::string> corpus;
  std::optional<std::string> properties;
  bool remote = false;
};

e2v::ProjectConfig load_config(const Globals& g, const Overrides& o) {
  e2v::ConfigDocument doc;
  fs::path base = fs::current_path();
  if (!g.config_path.empty()) {
    doc = e2v::ConfigDocument::load(g.config_path);
    base = fs::absolute(g.config_path).parent_path();
  } else if (fs::exists("e2v.toml")) {
    doc = e2v::ConfigDocument::load("e2v.toml");
  }
  auto config = e2v::ProjectConfig::from_document(doc, base);
  if (o.corpus) config.corpus_dir = fs::absolute(*o.corpus);
  if (o.properties) config.properties_dir = fs::absolute(*o.properties);
  if (o.remote) config.remote_llm = true;
  config.validate();
  return config;
}

void emit(const Globals& g, const json& result, const std::string& human) {
  if (g.json_out) {
    std::cout << result.dump() << "\n";
  } else if (!human.empty()) {
    std::cout << human << "\n";
  }
}

json counts_json(const e2v::StageCounts& c) { return {{"written", c.written}, {"skipped", c.skipped}}; }

std::string counts_text(const std::string& what, const e2v::StageCounts& c) {
  return what + ": " + std::to_string(c.written) + " written, " + std::to_string(c.skipped) + " up to date";
}

fs::path report_target(const e2v::Project& p, const std::string& out, const std::string& fallback) {
  return out.empty() ? p.path("reports") / fallback : fs::path(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Element text embeddings and their evaluation protocols"};
  app.require_subcommand(1);
  Globals g;
  Overrides o;
  app.add_option("--config", g.config_path, "Project configuration file (default ./e2v.toml when present)");
  app.add_flag("--force", g.force, "Redo work even when outputs are current");
  app.add_flag("--json", g.json_out, "Machine-readable output on stdout");

  auto transport = e2v::make_http_transport();
  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load the corpus into element records");
  bool fetch = false;
  std::string url_template;
  ingest->add_option("--corpus", o.corpus, "Corpus directory with manifest.csv");
  ingest->add_flag("--fetch", fetch, "Download pages missing from the corpus directory");
  ingest->add_option("--url-template", url_template, "Page URL with {name} placeholder");
  ingest->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      if (!url_template.empty()) config.url_template = url_template;
      e2v::Project p(config, transport.get());
      if (fetch) p.fetch_missing_pages();
      const auto c = p.ingest(g.force);
      emit(g, {{"command", "ingest"}, {"records", counts_json(c)}}, counts_text("records", c));
    };
  });

  // tag
  auto* tag = app.add_subcommand("tag", "Assign an attribute tag to every sentence");
  std::string tag_out;
  tag->add_option("--corpus", o.corpus, "Corpus directory");
  tag->add_flag("--remote", o.remote, "Use the remote language model (E2V_LLM_URL)");
  tag->add_option("--out", tag_out, "Output directory (default <work>/annotated)");
  tag->callback([&] {
    action = [&] {
      e2v::Project p(load_config(g, o), transport.get());
      const auto c = tag_out.empty() ? p.tag(g.force) : p.tag(g.force, fs::path(tag_out));
      emit(g, {{"command", "tag"}, {"annotated", counts_json(c)}}, counts_text("annotated", c));
    };
  });

  // summarize
  auto* summarize = app.add_subcommand("summarize", "Summarize every page at the given ratios");
  std::vector<double> summary_ratios;
  summarize->add_option("--ratio", summary_ratios, "Summary length ratio (repeatable)")->delimiter(',');
  summarize->add_flag("--remote", o.remote, "Use the remote language model (E2V_LLM_URL)");
  summarize->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      e2v::Project p(config, transport.get());
      const auto c = p.summarize(summary_ratios.empty() ? config.ratios : summary_ratios, g.force);
      emit(g, {{"command", "summarize"}, {"summaries", counts_json(c)}}, counts_text("summaries", c));
    };
  });

  // embed
  auto* embed = app.add_subcommand("embed", "Embed global and local texts");
  std::vector<std::string> variants = {"global"};
  std::vector<double> embed_ratios;
  std::vector<std::string> placements;
  std::optional<std::string> provider;
  std::optional<int> dim;
  std::optional<int> seed;
  embed->add_option("--variants", variants, "global,local")->delimiter(',');
  embed->add_option("--ratios", embed_ratios, "Summary ratios for local variants")->delimiter(',');
  embed->add_option("--placements", placements, "front,end")->delimiter(',');
  embed->add_option("--provider", provider, "remote or hash");
  embed->add_option("--dim", dim, "Embedding dimension");
  embed->add_option("--seed", seed, "Hash provider seed");
  embed->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      if (provider) config.provider = *provider;
      if (dim) config.dim = *dim;
      if (seed) config.provider_seed = static_cast<std::uint64_t>(*seed);
      if (!embed_ratios.empty()) config.ratios = embed_ratios;
      if (!placements.empty()) {
        config.placements.clear();
        for (const auto& pl : placements) config.placements.push_back(e2v::parse_placement(pl));
      }
      config.validate();
      e2v::EmbedRequest req;
      req.global = false;
      for (const auto& v : variants) {
        if (v == "global") req.global = true;
        else if (v == "local") req.local = true;
        else throw e2v::ConfigError("unknown variant '" + v + "' (expected global or local)");
      }
      req.placements = config.placements;
      e2v::Project p(config, transport.get());
      e2v::RunSummary s;
      const auto c = p.embed(req, config.ratios, g.force, &s);
      emit(g,
           {{"command", "embed"},
            {"vectors", counts_json(c)},
            {"computed", s.embeddings_computed},
            {"cache_hits", s.embedding_cache_hits}},
           counts_text("vectors", c) + " (" + std::to_string(s.embeddings_computed) + " computed, " +
               std::to_string(s.embedding_cache_hits) + " cache hits)");
    };
  });

  // data validate
  auto* data = app.add_subcommand("data", "Property tables");
  data->require_subcommand(1);
  auto* validate = data->add_subcommand("validate", "Check every property table");
  std::string properties_dir;
  validate->add_option("--properties", properties_dir, "Properties directory")->required();
  validate->callback([&] {
    action = [&] {
      const auto tables = e2v::load_property_dir(properties_dir);
      json out = json::array();
      std::string human;
      for (const auto& t : tables) {
        out.push_back({{"name", t.name}, {"units", t.units}, {"rows", t.values.size()}, {"known", t.known_count()}});
        human += t.name + ": " + std::to_string(t.known_count()) + "/" + std::to_string(t.values.size()) + " known" +
                 (t.units.empty() ? "" : " (" + t.units + ")") + "\n";
      }
      if (!human.empty()) human.pop_back();
      emit(g, {{"command", "data validate"}, {"tables", out}}, human);
    };
  });

  // analysis reports
  struct ReportOpts {
    std::string variant = "global";
    std::string property;
    std::string out;
  };
  auto add_report_opts = [](CLI::App* sub, ReportOpts& r) {
    sub->add_option("--variant", r.variant, "global, local-front, local-end or a stored variant key");
    sub->add_option("--property", r.property, "Property name");
    sub->add_option("--out", r.out, "Report path (JSON; the CSV goes next to it)");
  };
  auto written = [&](const std::string& name, const fs::path& target) {
    auto stem = target;
    if (stem.extension() == ".json" || stem.extension() == ".csv") stem.replace_extension();
    emit(g, {{"command", name}, {"json", stem.string() + ".json"}, {"csv", stem.string() + ".csv"}},
         name + " report: " + stem.string() + ".json");
  };

  ReportOpts entropy_opts;
  auto* entropy = app.add_subcommand("entropy", "Held-out family posterior entropies and their KDE");
  add_report_opts(entropy, entropy_opts);
  entropy->callback([&] {
    action = [&] {
      e2v::Project p(load_config(g, o));
      const auto r = p.entropy_report(entropy_opts.variant);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      const auto target = report_target(p, entropy_opts.out, "entropy_" + entropy_opts.variant);
      e2v::write_report(target, e2v::render_entropy(r, p.load_variant(entropy_opts.variant)));
      written("entropy", target);
    };
  });

  ReportOpts tsne_opts;
  std::optional<double> perplexity;
  auto* tsne = app.add_subcommand("tsne", "Two-dimensional t-SNE projection");
  add_report_opts(tsne, tsne_opts);
  tsne->add_option("--perplexity", perplexity, "Perplexity");
  tsne->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      if (perplexity) config.tsne.perplexity = *perplexity;
      e2v::Project p(config);
      const auto target = report_target(p, tsne_opts.out, "tsne_" + tsne_opts.variant);
      e2v::write_report(target, e2v::render_tsne(p.tsne_report(tsne_opts.variant), p.load_variant(tsne_opts.variant)));
      written("tsne", target);
    };
  });

  ReportOpts budget_opts;
  auto* budget = app.add_subcommand("budget", "RMSE against the top-k feature budget");
  add_report_opts(budget, budget_opts);
  budget->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      e2v::Project p(config);
      const auto property = budget_opts.property.empty() ? config.vdw_property : budget_opts.property;
      const auto target = report_target(p, budget_opts.out, "budget_" + budget_opts.variant + "_" + property);
      e2v::write_report(target, e2v::render_budget(p.budget_report(budget_opts.variant, property), budget_opts.variant, property));
      written("budget", target);
    };
  });

  ReportOpts sweep_opts;
  std::string predictor = "ttt";
  std::vector<double> sweep_ratios;
  std::optional<int> repeats;
  auto* sweep = app.add_subcommand("sweep", "RMSE against the missing ratio");
  add_report_opts(sweep, sweep_opts);
  sweep->add_option("--predictor", predictor, "ols, mlp or ttt");
  sweep->add_option("--ratios", sweep_ratios, "Missing ratios")->delimiter(',');
  sweep->add_option("--repeats", repeats, "Seeded splits per ratio");
  sweep->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      if (!sweep_ratios.empty()) config.sweep_ratios = sweep_ratios;
      if (repeats) {
        config.repeats = *repeats;
        config.seeds.clear();
      }
      config.validate();
      e2v::Project p(config);
      const auto pr = e2v::parse_predictor(predictor);
      const auto property = sweep_opts.property.empty() ? config.vdw_property : sweep_opts.property;
      const auto r = p.sweep_report(sweep_opts.variant, property, pr);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      e2v::SweepConfig sc;
      sc.repeats = config.repeats;
      sc.seeds = config.seed_list();
      sc.mlp = config.mlp;
      sc.ttt = config.ttt;
      const auto target = report_target(p, sweep_opts.out, "sweep_" + sweep_opts.variant + "_" + property + "_" + predictor);
      e2v::write_report(target, e2v::render_sweep(r, sweep_opts.variant, property, sc));
      written("sweep", target);
    };
  });

  ReportOpts overlap_opts;
  std::optional<int> overlap_k;
  auto* overlap = app.add_subcommand("overlap", "Top-k dimension overlap between properties");
  add_report_opts(overlap, overlap_opts);
  overlap->add_option("--k", overlap_k, "Top-k size");
  overlap->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      e2v::Project p(config);
      const auto k = static_cast<std::size_t>(overlap_k.value_or(config.overlap_k));
      const auto target = report_target(p, overlap_opts.out, "overlap_" + overlap_opts.variant);
      e2v::write_report(target, e2v::render_overlap(p.overlap_report(overlap_opts.variant, k), overlap_opts.variant));
      written("overlap", target);
    };
  });

  ReportOpts ttt_opts;
  double missing_rate = 0.2;
  int seeds = 5;
  auto* ttt = app.add_subcommand("ttt", "Test-time-training imputation over seeded splits");
  add_report_opts(ttt, ttt_opts);
  ttt->add_option("--missing-rate", missing_rate, "Fraction of known values withheld");
  ttt->add_option("--seeds", seeds, "Number of seeded splits");
  ttt->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      e2v::Project p(config);
      const auto property = ttt_opts.property.empty() ? config.vdw_property : ttt_opts.property;
      const auto r = p.ttt_report(ttt_opts.variant, property, missing_rate, seeds);
      const auto target = report_target(p, ttt_opts.out, "ttt_" + ttt_opts.variant + "_" + property);
      e2v::write_report(target, e2v::render_ttt(r, config.ttt));
      written("ttt", target);
    };
  });

  ReportOpts vdw_opts;
  auto* vdw = app.add_subcommand("vdw", "Per-element held-out predictions with confidence intervals");
  add_report_opts(vdw, vdw_opts);
  vdw->callback([&] {
    action = [&] {
      auto config = load_config(g, o);
      if (!vdw_opts.property.empty()) config.vdw_property = vdw_opts.property;
      e2v::Project p(config);
      const auto r = p.vdw_report(vdw_opts.variant);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      const auto target = report_target(p, vdw_opts.out, "vdw_" + vdw_opts.variant);
      e2v::write_report(target, e2v::render_vdw(r, config.ttt, config.vdw_missing_rate));
      written("vdw", target);
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Run pipeline stages in order and write run-manifest.json");
  std::vector<std::string> stages = {"ingest", "tag", "summarize", "embed", "analyze"};
  run->add_option("--stages", stages, "Subset of ingest,tag,summarize,embed,analyze")->delimiter(',');
  run->callback([&] {
    action = [&] {
      const auto config = load_config(g, o);
      std::vector<e2v::Stage> parsed;
      for (const auto& s : stages) parsed.push_back(e2v::parse_stage(s));
      const auto s = e2v::run_pipeline(config, parsed, g.force, transport.get());
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      emit(g,
           {{"command", "run"},
            {"manifest", (config.work_dir / "run-manifest.json").string()},
            {"computed", s.embeddings_computed},
            {"cache_hits", s.embedding_cache_hits},
            {"warnings", s.warnings}},
           "embeddings: " + std::to_string(s.embeddings_computed) + " computed, " +
               std::to_string(s.embedding_cache_hits) + " cache hits; manifest " +
               (config.work_dir / "run-manifest.json").string());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (action) action();
    return 0;
  } catch (const e2v::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (g.json_out) std::cout << json{{"error", e.what()}, {"exit_code", e.exit_code()}}.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (g.json_out) std::cout << json{{"error", e.what()}, {"exit_code", 1}}.dump() << "\n";
    return 1;
  }
}
