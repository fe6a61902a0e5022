#include "e2v/pipeline.hpp"

#include "e2v/io.hpp"
#include "e2v/parallel.hpp"
#include "e2v/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace e2v {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "paths.corpus",          "paths.work",          "paths.properties",  "fetch.url_template",
    "annotate.remote",       "annotate.ratios",     "annotate.placements", "annotate.concurrency",
    "provider.kind",         "provider.dim",        "provider.seed",     "analysis.folds",
    "analysis.fold_seed",    "analysis.budget_start", "analysis.budget_step", "analysis.tau",
    "analysis.sweep_ratios", "analysis.repeats",    "analysis.seeds",    "analysis.overlap_k",
    "analysis.variants",     "tsne.perplexity",     "tsne.iterations",   "tsne.step_size",
    "tsne.seed",             "ttt.model_dim",       "ttt.steps",         "ttt.step_size",
    "ttt.target_standardize", "mlp.hidden",         "mlp.alpha",         "mlp.max_epochs",
    "softmax.epochs",        "softmax.step_size",   "softmax.l2",        "vdw.property",
    "vdw.elements",          "vdw.missing_rate"};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string ratio_text(double r) { return io::format_double(r); }

fs::path summary_path(const fs::path& work, const std::string& symbol, double ratio) {
  return work / "summaries" / (symbol + "_" + ratio_text(ratio) + ".txt");
}

json record_json(const ElementRecord& r) {
  json sentences = json::array();
  for (const auto& s : r.sentences) {
    sentences.push_back({{"index", s.index}, {"text", s.text}, {"word_count", s.word_count}});
  }
  return {{"symbol", r.symbol},
          {"atomic_number", r.atomic_number},
          {"name", r.name},
          {"family", std::string(to_string(r.family))},
          {"text", r.page_text},
          {"sentences", sentences}};
}

ElementRecord record_from_json(const json& j) {
  ElementRecord r;
  r.symbol = j.at("symbol").get<std::string>();
  r.atomic_number = j.at("atomic_number").get<int>();
  r.name = j.at("name").get<std::string>();
  r.family = parse_family(j.at("family").get<std::string>());
  r.page_text = j.at("text").get<std::string>();
  for (const auto& s : j.at("sentences")) {
    r.sentences.push_back({s.at("index").get<std::size_t>(), s.at("text").get<std::string>(),
                           s.at("word_count").get<std::size_t>()});
  }
  return r;
}

bool same_file(const fs::path& p, std::string_view contents) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return false;
  return io::read_file(p) == contents;
}

// Writes unless identical contents are already there (or force).
bool write_if_changed(const fs::path& p, std::string_view contents, bool force) {
  if (!force && same_file(p, contents)) return false;
  fs::create_directories(p.parent_path());
  io::write_file_atomic(p, contents);
  return true;
}

}  // namespace

// ---- config --------------------------------------------------------------

ProjectConfig ProjectConfig::from_document(const ConfigDocument& doc, const fs::path& base) {
  for (const auto& k : doc.keys()) {
    if (!kKnownKeys.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  ProjectConfig c;
  c.corpus_dir = resolve(base, doc.get_string("paths.corpus", "corpus"));
  c.work_dir = resolve(base, doc.get_string("paths.work", "work"));
  c.properties_dir = resolve(base, doc.get_string("paths.properties", "properties"));
  c.url_template = doc.get_string("fetch.url_template", c.url_template);

  c.remote_llm = doc.get_bool("annotate.remote", c.remote_llm);
  c.ratios = doc.get_numbers("annotate.ratios", c.ratios);
  if (doc.has("annotate.placements")) {
    c.placements.clear();
    for (const auto& p : doc.get_strings("annotate.placements", {})) c.placements.push_back(parse_placement(p));
  }
  c.concurrency = static_cast<std::size_t>(doc.get_int("annotate.concurrency", static_cast<int>(c.concurrency)));

  c.provider = doc.get_string("provider.kind", c.provider);
  c.dim = doc.get_int("provider.dim", c.dim);
  c.provider_seed = static_cast<std::uint64_t>(doc.get_int("provider.seed", 0));

  c.folds = doc.get_int("analysis.folds", c.folds);
  c.fold_seed = static_cast<std::uint64_t>(doc.get_int("analysis.fold_seed", 0));
  c.budget_start = doc.get_int("analysis.budget_start", c.budget_start);
  c.budget_step = doc.get_int("analysis.budget_step", c.budget_step);
  c.tau = doc.get_number("analysis.tau", c.tau);
  c.sweep_ratios = doc.get_numbers("analysis.sweep_ratios", c.sweep_ratios);
  c.repeats = doc.get_int("analysis.repeats", c.repeats);
  for (double s : doc.get_numbers("analysis.seeds", {})) {
    if (s < 0 || s != std::floor(s)) throw ConfigError("analysis.seeds must be non-negative integers");
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  c.overlap_k = doc.get_int("analysis.overlap_k", c.overlap_k);
  c.variants = doc.get_strings("analysis.variants", c.variants);

  c.tsne.perplexity = doc.get_number("tsne.perplexity", c.tsne.perplexity);
  c.tsne.iterations = doc.get_int("tsne.iterations", c.tsne.iterations);
  c.tsne.step_size = doc.get_number("tsne.step_size", c.tsne.step_size);
  c.tsne.seed = static_cast<std::uint64_t>(doc.get_int("tsne.seed", 0));

  c.ttt.model_dim = doc.get_int("ttt.model_dim", c.ttt.model_dim);
  c.ttt.steps = doc.get_int("ttt.steps", c.ttt.steps);
  c.ttt.step_size = doc.get_number("ttt.step_size", c.ttt.step_size);
  c.ttt.target_standardize = doc.get_bool("ttt.target_standardize", c.ttt.target_standardize);

  c.mlp.hidden = doc.get_int("mlp.hidden", c.mlp.hidden);
  c.mlp.alpha = doc.get_number("mlp.alpha", c.mlp.alpha);
  c.mlp.max_epochs = doc.get_int("mlp.max_epochs", c.mlp.max_epochs);

  c.softmax.epochs = doc.get_int("softmax.epochs", c.softmax.epochs);
  c.softmax.step_size = doc.get_number("softmax.step_size", c.softmax.step_size);
  c.softmax.l2 = doc.get_number("softmax.l2", c.softmax.l2);

  c.vdw_property = doc.get_string("vdw.property", c.vdw_property);
  c.vdw_elements = doc.get_strings("vdw.elements", c.vdw_elements);
  c.vdw_missing_rate = doc.get_number("vdw.missing_rate", c.vdw_missing_rate);
  return c;
}

ProjectConfig ProjectConfig::load(const fs::path& path) {
  auto c = from_document(ConfigDocument::load(path), fs::absolute(path).parent_path());
  c.validate();
  return c;
}

void ProjectConfig::validate() const {
  if (!fs::is_directory(corpus_dir)) throw ConfigError("corpus dir does not exist: " + corpus_dir.string());
  if (!fs::is_directory(properties_dir)) {
    throw ConfigError("properties dir does not exist: " + properties_dir.string());
  }
  if (provider != "hash" && provider != "remote") throw ConfigError("provider.kind must be hash or remote");
  if (dim < 1) throw ConfigError("provider.dim must be positive");
  if (ratios.empty()) throw ConfigError("annotate.ratios must not be empty");
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("summary ratios must lie in (0, 1)");
  }
  if (placements.empty()) throw ConfigError("annotate.placements must not be empty");
  if (concurrency < 1) throw ConfigError("annotate.concurrency must be positive");
  if (folds < 2) throw ConfigError("analysis.folds must be at least 2");
  if (budget_start < 1 || budget_step < 1) throw ConfigError("budget grid must be positive");
  if (!(tau >= 0.0)) throw ConfigError("analysis.tau must be non-negative");
  if (repeats < 1) throw ConfigError("analysis.repeats must be positive");
  if (!seeds.empty() && seeds.size() != static_cast<std::size_t>(repeats)) {
    throw ConfigError("analysis.seeds must list exactly `repeats` seeds");
  }
  if (overlap_k < 1) throw ConfigError("analysis.overlap_k must be positive");
  if (!(vdw_missing_rate >= 0.0 && vdw_missing_rate < 1.0)) throw ConfigError("vdw.missing_rate must lie in [0, 1)");
  ttt.validate();
}

std::vector<std::uint64_t> ProjectConfig::seed_list() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s;
  for (int i = 0; i < repeats; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Tag: return "tag";
    case Stage::Summarize: return "summarize";
    case Stage::Embed: return "embed";
    case Stage::Analyze: return "analyze";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (Stage s : {Stage::Ingest, Stage::Tag, Stage::Summarize, Stage::Embed, Stage::Analyze}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown stage '" + std::string(text) + "'");
}

// ---- stages --------------------------------------------------------------

Project::Project(ProjectConfig config, HttpTransport* transport)
    : config_(std::move(config)), transport_(transport) {}

void Project::fetch_missing_pages() {
  if (!transport_) throw ConfigError("fetching pages needs a network transport");
  for (const auto& entry : load_manifest(config_.corpus_dir / "manifest.csv")) {
    const auto target = config_.corpus_dir / (entry.symbol + ".txt");
    if (fs::exists(target)) continue;
    io::write_file_atomic(target, fetch_page(entry.name, config_.url_template, *transport_));
  }
}

StageCounts Project::ingest(bool force) {
  StageCounts counts;
  for (const auto& r : load_corpus(config_.corpus_dir)) {
    if (write_if_changed(path("records") / (r.symbol + ".json"), record_json(r).dump(2) + "\n", force)) {
      ++counts.written;
    } else {
      ++counts.skipped;
    }
  }
  return counts;
}

std::vector<ElementRecord> Project::records() const {
  const auto dir = path("records");
  if (!fs::is_directory(dir)) throw PrerequisiteError("no element records; run ingest first");
  std::vector<ElementRecord> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    try {
      out.push_back(record_from_json(json::parse(io::read_file(e.path()))));
    } catch (const json::exception& ex) {
      throw DataError("bad record " + e.path().string() + ": " + ex.what());
    }
  }
  if (out.empty()) throw PrerequisiteError("no element records; run ingest first");
  std::sort(out.begin(), out.end(), [](const ElementRecord& a, const ElementRecord& b) {
    return a.atomic_number < b.atomic_number;
  });
  return out;
}

StageCounts Project::tag(bool force, const std::optional<fs::path>& out_dir) {
  const auto dir = out_dir.value_or(path("annotated"));
  const auto lexicon = KeywordTagger::builtin();
  std::optional<RemoteLlmClient> llm;
  if (config_.remote_llm) {
    if (!transport_) throw ConfigError("remote tagging needs a network transport");
    llm.emplace(RemoteLlmClient::from_environment(*transport_));
  }
  const SentenceTagger tagger = llm ? SentenceTagger(lexicon, *llm, PromptSet::defaults()) : SentenceTagger(lexicon);

  StageCounts counts;
  for (const auto& r : records()) {
    const auto target = dir / (r.symbol + ".jsonl");
    if (!force && fs::exists(target)) {
      const auto existing = from_jsonl(io::read_file(target));
      const bool current = existing.size() == r.sentences.size() &&
                           std::equal(existing.begin(), existing.end(), r.sentences.begin(),
                                      [](const TaggedSentence& t, const Sentence& s) { return t.sentence.text == s.text; });
      if (current) {
        ++counts.skipped;
        continue;
      }
    }
    fs::create_directories(dir);
    io::write_file_atomic(target, to_jsonl(tag_sentences(r.sentences, tagger, config_.concurrency)));
    ++counts.written;
  }
  return counts;
}

StageCounts Project::summarize(const std::vector<double>& ratios, bool force) {
  std::optional<RemoteLlmClient> llm;
  if (config_.remote_llm) {
    if (!transport_) throw ConfigError("remote summaries need a network transport");
    llm.emplace(RemoteLlmClient::from_environment(*transport_));
  }
  const PageSummarizer summarizer = llm ? PageSummarizer(*llm, PromptSet::defaults()) : PageSummarizer();
  StageCounts counts;
  const auto recs = records();
  for (double ratio : ratios) {
    for (const auto& r : recs) {
      const auto target = summary_path(config_.work_dir, r.symbol, ratio);
      if (!force && fs::exists(target)) {
        ++counts.skipped;
        continue;
      }
      const Summary s = e2v::summarize(r.symbol, r.page_text, ratio, summarizer);
      fs::create_directories(target.parent_path());
      io::write_file_atomic(target, s.text);
      ++counts.written;
    }
  }
  return counts;
}

std::unique_ptr<EmbeddingProvider> Project::make_provider() const {
  if (config_.provider == "hash") return std::make_unique<HashEmbeddingProvider>(config_.dim, config_.provider_seed);
  if (!transport_) throw ConfigError("the remote embedding provider needs a network transport");
  return std::make_unique<RemoteEmbeddingProvider>(RemoteEmbeddingProvider::from_environment(config_.dim, *transport_));
}

StageCounts Project::embed(const EmbedRequest& request, const std::vector<double>& ratios, bool force,
                           RunSummary* summary) {
  const auto recs = records();
  std::map<std::string, std::vector<TaggedSentence>> tagged;
  std::map<std::pair<std::string, double>, Summary> summaries;
  if (request.local) {
    for (const auto& r : recs) {
      const auto a = path("annotated") / (r.symbol + ".jsonl");
      if (!fs::exists(a)) throw PrerequisiteError("no annotations for " + r.symbol + "; run tag first");
      tagged[r.symbol] = from_jsonl(io::read_file(a));
      for (double ratio : ratios) {
        const auto p = summary_path(config_.work_dir, r.symbol, ratio);
        if (!fs::exists(p)) {
          throw PrerequisiteError("no " + ratio_text(ratio) + " summary for " + r.symbol + "; run summarize first");
        }
        Summary s;
        s.element_symbol = r.symbol;
        s.ratio = ratio;
        s.text = io::read_file(p);
        s.word_count = count_words(s.text);
        summaries[{r.symbol, ratio}] = std::move(s);
      }
    }
  }

  auto provider = make_provider();
  EmbeddingCache cache(path("cache"));
  Embedder embedder(*provider, &cache);
  EmbeddingStore store(path("embeddings"));
  for (const auto& entry : store.catalog()) {
    const int expect = entry.variant.kind == VariantKind::Aggregated ? config_.dim * static_cast<int>(kTagCount)
                                                                     : config_.dim;
    if (entry.dim != expect) {
      throw ConfigError("stored embeddings have dim " + std::to_string(entry.dim) + " but the provider has " +
                        std::to_string(config_.dim) + "; use a fresh work dir");
    }
  }

  StageCounts counts;
  for (const auto& r : recs) {
    std::vector<EmbeddingVector> out;
    if (request.global) {
      EmbedRequest g = request;
      g.local = false;
      auto v = embed_element(r, nullptr, nullptr, embedder, g);
      out.insert(out.end(), v.begin(), v.end());
    }
    if (request.local) {
      const auto subsets = build_attribute_subsets(tagged.at(r.symbol));
      for (double ratio : ratios) {
        EmbedRequest l = request;
        l.global = false;
        const auto locals = embed_element(r, &subsets, &summaries.at({r.symbol, ratio}), embedder, l);
        for (std::size_t p = 0; p < request.placements.size(); ++p) {
          const std::span<const EmbeddingVector> block(locals.data() + p * kTagCount, kTagCount);
          out.insert(out.end(), block.begin(), block.end());
          out.push_back(aggregate_locals(block));
        }
      }
    }
    std::vector<EmbeddingVector> changed;
    for (auto& v : out) {
      if (!force && store.contains(v.element_symbol, v.variant)) {
        const auto old = store.get(v.element_symbol, v.variant);
        if (old.values == v.values && old.empty_subset == v.empty_subset) {
          ++counts.skipped;
          continue;
        }
      }
      changed.push_back(std::move(v));
    }
    counts.written += changed.size();
    if (!changed.empty()) store.put_all(changed);
  }
  if (summary) {
    summary->embeddings_computed += embedder.computed();
    summary->embedding_cache_hits += embedder.cache_hits();
  }
  return counts;
}

// ---- analysis inputs -----------------------------------------------------

namespace {

VariantDescriptor variant_for(const std::string& label, const ProjectConfig& config) {
  if (label == "global") return VariantDescriptor::global();
  if (label == "local-front") return VariantDescriptor::aggregated(config.ratios.front(), Placement::Front);
  if (label == "local-end") return VariantDescriptor::aggregated(config.ratios.front(), Placement::End);
  return VariantDescriptor::parse_key(label);
}

}  // namespace

VariantMatrix Project::load_variant(const std::string& label) const {
  const VariantDescriptor variant = variant_for(label, config_);
  const EmbeddingStore store(path("embeddings"));
  VariantMatrix m;
  m.label = label;
  std::vector<Eigen::VectorXf> rows;
  for (const auto& r : records()) {
    if (!store.contains(r.symbol, variant)) {
      throw PrerequisiteError("no '" + variant.key() + "' embedding for " + r.symbol + "; run embed first");
    }
    auto v = store.get(r.symbol, variant);
    if (!rows.empty() && v.dim() != rows.front().size()) throw DataError("stored vectors differ in dim");
    m.symbols.push_back(r.symbol);
    m.atomic_numbers.push_back(r.atomic_number);
    m.families.push_back(r.family);
    m.empty_subset.push_back(v.empty_subset);
    rows.push_back(std::move(v.values));
  }
  m.x.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.x.row(static_cast<Eigen::Index>(i)) = rows[i].cast<double>().transpose();
  return m;
}

std::vector<PropertyTable> Project::properties() const { return load_property_dir(config_.properties_dir); }

PropertyTable Project::property(const std::string& name) const {
  const auto p = config_.properties_dir / (name + ".csv");
  if (!fs::exists(p)) throw ConfigError("no property table " + p.string());
  return load_property_table(p);
}

SweepInput Project::regression_input(const std::string& variant, const std::string& property_name) const {
  const auto m = load_variant(variant);
  const auto table = property(property_name);
  SweepInput in;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < m.symbols.size(); ++i) {
    // Elements whose local text is missing are dropped from regression.
    if (m.empty_subset[i]) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
    in.symbols.push_back(m.symbols[i]);
    in.atomic_numbers.push_back(m.atomic_numbers[i]);
    const auto it = table.values.find(m.symbols[i]);
    if (it != table.values.end() && it->second) in.known[m.symbols[i]] = *it->second;
  }
  in.x = select_rows(m.x, keep);
  if (in.known.size() < 2) throw DataError(property_name + ": fewer than 2 known values among usable elements");
  return in;
}

// ---- reports -------------------------------------------------------------

FamilyReport Project::entropy_report(const std::string& variant) const {
  const auto m = load_variant(variant);
  std::vector<int> labels;
  for (Family f : m.families) labels.push_back(static_cast<int>(f));
  const auto n = m.symbols.size();
  const auto folds = kfold(n, std::min<std::size_t>(static_cast<std::size_t>(config_.folds), n), config_.fold_seed);
  return classify_families(m.x, labels, m.symbols, folds, variant, config_.softmax);
}

Projection2D Project::tsne_report(const std::string& variant) const { return tsne(load_variant(variant).x, config_.tsne); }

BudgetSweep Project::budget_report(const std::string& variant, const std::string& property_name) const {
  const auto in = regression_input(variant, property_name);
  std::vector<Eigen::Index> rows;
  Eigen::VectorXd y(static_cast<Eigen::Index>(in.known.size()));
  for (std::size_t i = 0; i < in.symbols.size(); ++i) {
    const auto it = in.known.find(in.symbols[i]);
    if (it == in.known.end()) continue;
    y[static_cast<Eigen::Index>(rows.size())] = it->second;
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  const auto n = rows.size();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(config_.folds), n);
  if (n < 3) throw DataError(property_name + ": budget sweep needs at least 3 known values");
  const auto folds = kfold(n, k, config_.fold_seed);
  const auto x = select_rows(in.x, rows);
  return feature_budget_sweep(x, y, default_budgets(static_cast<int>(x.cols()), config_.budget_start, config_.budget_step),
                              folds, config_.tau, property_name);
}

SweepReport Project::sweep_report(const std::string& variant, const std::string& property_name,
                                  Predictor predictor) const {
  SweepConfig sc;
  sc.ratios = config_.sweep_ratios;
  sc.repeats = config_.repeats;
  sc.seeds = config_.seed_list();
  sc.mlp = config_.mlp;
  sc.ttt = config_.ttt;
  sc.concurrency = config_.concurrency;
  return missing_ratio_sweep(predictor, regression_input(variant, property_name), sc);
}

std::vector<FeatureRanking> Project::fit_rankings(const std::string& variant) const {
  std::vector<FeatureRanking> out;
  for (const auto& table : properties()) {
    SweepInput in;
    try {
      in = regression_input(variant, table.name);
    } catch (const DataError&) {
      continue;
    }
    std::vector<Eigen::Index> rows;
    Eigen::VectorXd y(static_cast<Eigen::Index>(in.known.size()));
    for (std::size_t i = 0; i < in.symbols.size(); ++i) {
      const auto it = in.known.find(in.symbols[i]);
      if (it == in.known.end()) continue;
      y[static_cast<Eigen::Index>(rows.size())] = it->second;
      rows.push_back(static_cast<Eigen::Index>(i));
    }
    const auto x = select_rows(in.x, rows);
    const auto scaler = Standardizer::fit(x);
    const auto model = fit_linear(scaler.apply(x), y, scaler.fitted_on());
    out.push_back(rank_features(model, table.name));
    fs::create_directories(path("models"));
    io::write_file_atomic(path("models") / (table.name + ".json"), render_model(model, out.back(), variant));
  }
  return out;
}

OverlapMatrix Project::overlap_report(const std::string& variant, std::size_t k) const {
  const auto rankings = fit_rankings(variant);
  if (rankings.empty()) throw DataError("no property supports a ranking");
  return overlap_matrix(rankings, std::min(k, rankings.front().order.size()));
}

TttReport Project::ttt_report(const std::string& variant, const std::string& property_name, double missing_rate,
                              int seeds) const {
  if (seeds < 1) throw ConfigError("ttt needs at least one seed");
  const auto in = regression_input(variant, property_name);
  std::set<std::string> known;
  std::set<std::string> unknown;
  for (const auto& [s, v] : in.known) known.insert(s);
  for (const auto& s : in.symbols) {
    if (!known.contains(s)) unknown.insert(s);
  }
  std::vector<SequenceItem> items;
  for (std::size_t i = 0; i < in.symbols.size(); ++i) {
    items.push_back({in.symbols[i], in.atomic_numbers[i], in.x.row(static_cast<Eigen::Index>(i)).transpose()});
  }

  TttReport report;
  report.property = property_name;
  report.variant = variant;
  report.missing_rate = missing_rate;
  report.runs.resize(static_cast<std::size_t>(seeds));
  parallel_for(report.runs.size(), config_.concurrency, [&](std::size_t s) {
    TttRun& run = report.runs[s];
    run.seed = s;
    run.split = make_split(known, missing_rate, run.seed, unknown);
    if (run.split.test.empty()) throw ConfigError("missing rate leaves no test elements to score");
    std::map<std::string, double> train;
    for (const auto& sym : run.split.train) train[sym] = in.known.at(sym);
    TttConfig tc = config_.ttt;
    tc.seed = run.seed;
    run.result = ttt_impute(items, train, tc);
    Eigen::VectorXd truth(static_cast<Eigen::Index>(run.split.test.size()));
    Eigen::VectorXd pred(truth.size());
    Eigen::Index i = 0;
    for (const auto& sym : run.split.test) {
      truth[i] = in.known.at(sym);
      pred[i++] = run.result.predictions.at(sym);
    }
    run.test_rmse = rmse(truth, pred);
  });
  std::vector<double> scores;
  for (const auto& r : report.runs) scores.push_back(r.test_rmse);
  std::tie(report.mean_rmse, report.ci) = mean_ci(scores);
  return report;
}

VdwReport Project::vdw_report(const std::string& variant) const {
  const auto table = property(config_.vdw_property);
  const auto in = regression_input(variant, config_.vdw_property);
  VdwReport report;
  report.property = config_.vdw_property;
  report.variant = variant;
  report.units = table.units;

  std::vector<std::string> reported;
  for (const auto& sym : config_.vdw_elements) {
    if (!in.known.contains(sym)) {
      report.warnings.push_back(sym + " excluded: no true value among usable elements");
      continue;
    }
    reported.push_back(sym);
  }
  std::vector<SequenceItem> items;
  std::set<std::string> all_known;
  for (const auto& [s, v] : in.known) all_known.insert(s);
  for (std::size_t i = 0; i < in.symbols.size(); ++i) {
    items.push_back({in.symbols[i], in.atomic_numbers[i], in.x.row(static_cast<Eigen::Index>(i)).transpose()});
  }
  const auto seeds = config_.seed_list();
  std::vector<double> preds(reported.size() * seeds.size(), 0.0);
  parallel_for(preds.size(), config_.concurrency, [&](std::size_t job) {
    const auto& sym = reported[job / seeds.size()];
    const auto seed = seeds[job % seeds.size()];
    auto others = all_known;
    others.erase(sym);
    const auto split = make_split(others, config_.vdw_missing_rate, seed);
    std::map<std::string, double> train;
    for (const auto& s : split.train) train[s] = in.known.at(s);
    TttConfig tc = config_.ttt;
    tc.seed = seed;
    preds[job] = ttt_impute(items, train, tc).predictions.at(sym);
  });
  for (std::size_t e = 0; e < reported.size(); ++e) {
    VdwRow row;
    row.symbol = reported[e];
    row.truth = in.known.at(row.symbol);
    row.runs.assign(preds.begin() + static_cast<std::ptrdiff_t>(e * seeds.size()),
                    preds.begin() + static_cast<std::ptrdiff_t>((e + 1) * seeds.size()));
    std::tie(row.predicted, row.ci) = mean_ci(row.runs);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void Project::analyze(RunSummary& summary) {
  const auto reports = path("reports");
  auto attempt = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const DataError& e) {
      summary.warnings.push_back(name + " skipped: " + e.what());
    }
  };
  std::vector<std::string> property_names;
  for (const auto& t : properties()) property_names.push_back(t.name);

  for (const auto& variant : config_.variants) {
    const auto data = load_variant(variant);
    attempt("entropy_" + variant, [&] {
      const auto r = entropy_report(variant);
      for (const auto& w : r.warnings) summary.warnings.push_back("entropy_" + variant + ": " + w);
      write_report(reports / ("entropy_" + variant), render_entropy(r, data));
    });
    attempt("tsne_" + variant, [&] { write_report(reports / ("tsne_" + variant), render_tsne(tsne_report(variant), data)); });
    for (const auto& p : property_names) {
      attempt("budget_" + variant + "_" + p, [&] {
        write_report(reports / ("budget_" + variant + "_" + p), render_budget(budget_report(variant, p), variant, p));
      });
    }
    attempt("overlap_" + variant, [&] {
      write_report(reports / ("overlap_" + variant),
                   render_overlap(overlap_report(variant, static_cast<std::size_t>(config_.overlap_k)), variant));
    });
    for (Predictor pr : {Predictor::Ols, Predictor::Mlp, Predictor::Ttt}) {
      const std::string name = "sweep_" + variant + "_" + config_.vdw_property + "_" + std::string(to_string(pr));
      attempt(name, [&] {
        const auto r = sweep_report(variant, config_.vdw_property, pr);
        for (const auto& w : r.warnings) summary.warnings.push_back(name + ": " + w);
        SweepConfig sc;
        sc.repeats = config_.repeats;
        sc.seeds = config_.seed_list();
        sc.mlp = config_.mlp;
        sc.ttt = config_.ttt;
        write_report(reports / name, render_sweep(r, variant, config_.vdw_property, sc));
      });
    }
  }
  const auto& first = config_.variants.front();
  attempt("vdw_" + first, [&] {
    const auto r = vdw_report(first);
    for (const auto& w : r.warnings) summary.warnings.push_back("vdw_" + first + ": " + w);
    write_report(reports / ("vdw_" + first), render_vdw(r, config_.ttt, config_.vdw_missing_rate));
  });
}

void Project::write_manifest(const RunSummary& summary) const {
  std::vector<std::string> files;
  if (fs::is_directory(config_.work_dir)) {
    for (const auto& e : fs::recursive_directory_iterator(config_.work_dir)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), config_.work_dir).generic_string();
      if (rel == "run-manifest.json" || rel.find(".tmp") != std::string::npos) continue;
      files.push_back(rel);
    }
  }
  std::sort(files.begin(), files.end());
  json artifacts = json::array();
  for (const auto& f : files) {
    const auto bytes = io::read_file(config_.work_dir / f);
    artifacts.push_back({{"path", f}, {"sha256", io::sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  json stages = json::array();
  for (Stage s : summary.stages) stages.push_back(std::string(to_string(s)));
  const json j = {{"stages", stages}, {"artifacts", artifacts}, {"warnings", summary.warnings}};
  io::write_file_atomic(config_.work_dir / "run-manifest.json", j.dump(2) + "\n");
}

RunSummary run_pipeline(const ProjectConfig& config, const std::vector<Stage>& stages, bool force,
                        HttpTransport* transport) {
  Project project(config, transport);
  RunSummary summary;
  std::vector<Stage> ordered = stages;
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  summary.stages = ordered;
  fs::create_directories(config.work_dir);
  for (Stage s : ordered) {
    switch (s) {
      case Stage::Ingest: project.ingest(force); break;
      case Stage::Tag: project.tag(force); break;
      case Stage::Summarize: project.summarize(config.ratios, force); break;
      case Stage::Embed: {
        EmbedRequest req;
        req.global = true;
        req.local = true;
        req.placements = config.placements;
        project.embed(req, config.ratios, force, &summary);
        break;
      }
      case Stage::Analyze: project.analyze(summary); break;
    }
  }
  project.write_manifest(summary);
  return summary;
}

}  // namespace e2v
