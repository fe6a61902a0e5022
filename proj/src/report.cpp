#include "e2v/report.hpp"

#include "e2v/io.hpp"

#include <json.hpp>

#include <cmath>

namespace e2v {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json vec(const Eigen::VectorXd& v) {
  return numbers(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv(const std::vector<io::CsvRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += io::format_csv_row(r);
  return out;
}

std::string num(double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); }

json tsne_settings(const TsneConfig& c) {
  return {{"perplexity", c.perplexity},       {"iterations", c.iterations},
          {"step_size", c.step_size},         {"exaggeration", c.exaggeration},
          {"exaggeration_steps", c.exaggeration_steps}, {"momentum", c.momentum},
          {"final_momentum", c.final_momentum}, {"momentum_switch", c.momentum_switch},
          {"init_scale", c.init_scale},       {"seed", c.seed}};
}

json ttt_settings(const TttConfig& c) {
  return {{"model_dim", c.model_dim}, {"heads", c.heads},   {"steps", c.steps},
          {"step_size", c.step_size}, {"seed", c.seed},     {"target_standardize", c.target_standardize},
          {"window", c.window},       {"stale_windows", c.stale_windows}};
}

json mlp_settings(const MlpConfig& c) {
  return {{"hidden", c.hidden},
          {"alpha", c.alpha},
          {"max_epochs", c.max_epochs},
          {"step_size", c.adam.step_size},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"early_stopping", c.early_stopping},
          {"validation_fraction", c.validation_fraction},
          {"patience", c.patience}};
}

json string_set(const std::set<std::string>& s) { return json(std::vector<std::string>(s.begin(), s.end())); }

}  // namespace

ReportText render_entropy(const FamilyReport& report, const VariantMatrix& data) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < data.symbols.size(); ++i) row_of[data.symbols[i]] = i;

  json elements = json::array();
  std::vector<io::CsvRow> rows = {{"symbol", "family", "entropy"}};
  for (std::size_t i = 0; i < report.symbols.size(); ++i) {
    const auto& sym = report.symbols[i];
    const std::string family(to_string(data.families[row_of.at(sym)]));
    elements.push_back({{"symbol", sym},
                        {"family", family},
                        {"entropy", number(report.entropies[i])},
                        {"posterior", vec(report.posteriors.row(static_cast<Eigen::Index>(i)).transpose())}});
    rows.push_back({sym, family, num(report.entropies[i])});
  }
  std::vector<std::string> labels;
  for (Family f : kAllFamilies) labels.emplace_back(to_string(f));
  const json j = {{"report", "entropy"},
                  {"variant", report.variant},
                  {"classifier",
                   {{"kind", "multinomial logistic regression"},
                    {"classes", report.classifier.classes},
                    {"epochs", report.classifier.epochs},
                    {"step_size", report.classifier.step_size},
                    {"l2", report.classifier.l2}}},
                  {"class_labels", labels},
                  {"entropy_guard", kEntropyGuard},
                  {"elements", elements},
                  {"kde",
                   {{"kernel", "gaussian"},
                    {"bandwidth_rule", "silverman"},
                    {"bandwidth", report.kde.bandwidth},
                    {"grid", numbers(report.kde.grid)},
                    {"density", numbers(report.kde.density)}}},
                  {"warnings", report.warnings}};
  return {dump(j), csv(rows)};
}

ReportText render_tsne(const Projection2D& projection, const VariantMatrix& data) {
  json points = json::array();
  std::vector<io::CsvRow> rows = {{"symbol", "family", "x", "y"}};
  for (std::size_t i = 0; i < data.symbols.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::string family(to_string(data.families[i]));
    points.push_back({{"symbol", data.symbols[i]},
                      {"family", family},
                      {"x", number(projection.coords(r, 0))},
                      {"y", number(projection.coords(r, 1))}});
    rows.push_back({data.symbols[i], family, num(projection.coords(r, 0)), num(projection.coords(r, 1))});
  }
  const json j = {{"report", "tsne"},
                  {"variant", data.label},
                  {"settings", tsne_settings(projection.settings)},
                  {"points", points},
                  {"kl_final", projection.kl_trace.empty() ? json(nullptr) : number(projection.kl_trace.back())},
                  {"kl_trace", numbers(projection.kl_trace)}};
  return {dump(j), csv(rows)};
}

ReportText render_budget(const BudgetSweep& sweep, const std::string& variant, const std::string& property) {
  const auto& c = sweep.curve;
  const auto normalized = normalize_curve(c.rmse);
  std::vector<io::CsvRow> rows = {{"budget", "rmse", "normalized_rmse"}};
  for (std::size_t i = 0; i < c.budgets.size(); ++i) {
    rows.push_back({std::to_string(c.budgets[i]), num(c.rmse[i]), num(normalized[i])});
  }
  json folds = json::array();
  for (std::size_t f = 0; f < sweep.fold_rankings.size(); ++f) {
    const auto& r = sweep.fold_rankings[f];
    const std::size_t show = std::min<std::size_t>(r.order.size(), 32);
    folds.push_back({{"rmse", numbers(sweep.fold_rmse[f])},
                     {"top_dims", std::vector<Eigen::Index>(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(show))}});
  }
  const json j = {{"report", "budget"},
                  {"variant", variant},
                  {"property", property},
                  {"budgets", c.budgets},
                  {"rmse", numbers(c.rmse)},
                  {"normalized_rmse", numbers(normalized)},
                  {"normalization", "divided by the curve maximum"},
                  {"best_tail_average", number(c.best_tail_average)},
                  {"saturation_dim", c.saturation_dim},
                  {"tau", c.tau},
                  {"folds", folds}};
  return {dump(j), csv(rows)};
}

ReportText render_sweep(const SweepReport& report, const std::string& variant, const std::string& property,
                        const SweepConfig& config) {
  json points = json::array();
  std::vector<io::CsvRow> rows = {{"ratio", "mean_rmse", "ci95"}};
  for (const auto& p : report.points) {
    points.push_back({{"ratio", p.ratio}, {"mean_rmse", number(p.mean)}, {"ci95", number(p.ci)}, {"rmse", numbers(p.rmse)}});
    rows.push_back({io::format_double(p.ratio), num(p.mean), num(p.ci)});
  }
  json j = {{"report", "sweep"},
            {"predictor", std::string(to_string(report.predictor))},
            {"variant", variant},
            {"property", property},
            {"repeats", config.repeats},
            {"seeds", config.seeds},
            {"ci", "1.96 * sample std / sqrt(repeats)"},
            {"points", points},
            {"warnings", report.warnings}};
  if (report.predictor == Predictor::Ttt) j["ttt"] = ttt_settings(config.ttt);
  if (report.predictor == Predictor::Mlp) j["mlp"] = mlp_settings(config.mlp);
  return {dump(j), csv(rows)};
}

ReportText render_overlap(const OverlapMatrix& matrix, const std::string& variant) {
  json counts = json::array();
  std::vector<io::CsvRow> rows = {{"row", "column", "overlap"}};
  for (Eigen::Index i = 0; i < matrix.counts.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < matrix.counts.cols(); ++j) {
      row.push_back(matrix.counts(i, j));
      rows.push_back({matrix.names[static_cast<std::size_t>(i)], matrix.names[static_cast<std::size_t>(j)],
                      std::to_string(matrix.counts(i, j))});
    }
    counts.push_back(row);
  }
  std::vector<std::string> ordered;
  for (auto i : matrix.cluster_order) ordered.push_back(matrix.names[i]);
  const json j = {{"report", "overlap"},     {"variant", variant},        {"k", matrix.k},
                  {"properties", matrix.names}, {"counts", counts},
                  {"cluster_order", ordered}, {"linkage", "average on k - overlap"}};
  return {dump(j), csv(rows)};
}

ReportText render_ttt(const TttReport& report, const TttConfig& config) {
  json runs = json::array();
  std::vector<io::CsvRow> rows = {{"seed", "test_rmse", "final_train_rmse", "steps_run", "early_stopped"}};
  for (const auto& r : report.runs) {
    json preds = json::object();
    for (const auto& [sym, v] : r.result.predictions) preds[sym] = number(v);
    runs.push_back({{"seed", r.seed},
                    {"train", string_set(r.split.train)},
                    {"test", string_set(r.split.test)},
                    {"test_rmse", number(r.test_rmse)},
                    {"final_train_rmse", number(r.result.final_train_rmse)},
                    {"steps_run", r.result.steps_run},
                    {"early_stopped", r.result.early_stopped},
                    {"predictions", preds},
                    {"loss_trace", numbers(r.result.loss_trace)}});
    rows.push_back({std::to_string(r.seed), num(r.test_rmse), num(r.result.final_train_rmse),
                    std::to_string(r.result.steps_run), r.result.early_stopped ? "true" : "false"});
  }
  const json j = {{"report", "ttt"},
                  {"property", report.property},
                  {"variant", report.variant},
                  {"missing_rate", report.missing_rate},
                  {"mean_test_rmse", number(report.mean_rmse)},
                  {"ci95", number(report.ci)},
                  {"config", ttt_settings(config)},
                  {"runs", runs}};
  return {dump(j), csv(rows)};
}

ReportText render_vdw(const VdwReport& report, const TttConfig& config, double missing_rate) {
  json rows_json = json::array();
  std::vector<io::CsvRow> rows = {{"symbol", "true", "predicted", "ci95"}};
  for (const auto& r : report.rows) {
    rows_json.push_back({{"symbol", r.symbol},
                         {"true", number(r.truth)},
                         {"predicted", number(r.predicted)},
                         {"ci95", number(r.ci)},
                         {"runs", numbers(r.runs)}});
    rows.push_back({r.symbol, num(r.truth), num(r.predicted), num(r.ci)});
  }
  const json j = {{"report", "vdw"},
                  {"property", report.property},
                  {"units", report.units},
                  {"variant", report.variant},
                  {"holdout_extra_missing_rate", missing_rate},
                  {"ci", "1.96 * sample std / sqrt(repeats)"},
                  {"config", ttt_settings(config)},
                  {"rows", rows_json},
                  {"warnings", report.warnings}};
  return {dump(j), csv(rows)};
}

std::string render_model(const LinearModel& model, const FeatureRanking& ranking, const std::string& variant) {
  const json j = {{"model", "ols"},
                  {"property", ranking.property},
                  {"variant", variant},
                  {"solver", "minimum-norm least squares (thin SVD, cutoff 1e-10 * max singular value)"},
                  {"inputs", "z-scored on the fitted rows"},
                  {"weights", vec(model.weights)},
                  {"intercept", number(model.intercept)},
                  {"ranking", ranking.order}};
  return dump(j);
}

void write_report(const std::filesystem::path& json_path, const ReportText& report) {
  auto stem = json_path;
  if (stem.extension() == ".json" || stem.extension() == ".csv") stem.replace_extension();
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  io::write_file_atomic(stem.string() + ".json", report.json);
  io::write_file_atomic(stem.string() + ".csv", report.csv);
}

}  // namespace e2v
