#pragma once

#include "e2v/analysis.hpp"
#include "e2v/annotate.hpp"
#include "e2v/config.hpp"
#include "e2v/corpus.hpp"
#include "e2v/dataset.hpp"
#include "e2v/embed.hpp"
#include "e2v/ttt.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace e2v {

struct ProjectConfig {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path work_dir = "work";
  std::filesystem::path properties_dir = "properties";
  std::string url_template = "https://en.wikipedia.org/wiki/{name}";

  // annotation
  bool remote_llm = false;
  std::vector<double> ratios = {0.05, 0.1, 0.2};
  std::vector<Placement> placements = {Placement::Front, Placement::End};
  std::size_t concurrency = 4;

  // provider
  std::string provider = "hash";  // hash | remote
  int dim = 768;
  std::uint64_t provider_seed = 0;

  // analysis
  int folds = 10;
  std::uint64_t fold_seed = 0;
  int budget_start = 100;
  int budget_step = 10;
  double tau = 0.02;
  std::vector<double> sweep_ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  int repeats = 5;
  std::vector<std::uint64_t> seeds;  // empty = 0..repeats-1
  int overlap_k = 100;
  TsneConfig tsne{};
  TttConfig ttt{};
  MlpConfig mlp{};
  SoftmaxConfig softmax{};
  std::vector<std::string> variants = {"global", "local-front", "local-end"};
  std::string vdw_property = "vdw_radius";
  std::vector<std::string> vdw_elements = {"He", "C", "Ca", "Ar", "Br", "Au", "Nb", "Sm"};
  double vdw_missing_rate = 0.2;

  /// Relative paths resolve against `base`. Unknown keys are rejected; call
  /// validate() once any overrides are applied.
  static ProjectConfig from_document(const ConfigDocument& doc, const std::filesystem::path& base);
  /// from_document plus validate().
  static ProjectConfig load(const std::filesystem::path& path);
  void validate() const;
  std::vector<std::uint64_t> seed_list() const;
};

enum class Stage { Ingest, Tag, Summarize, Embed, Analyze };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct StageCounts {
  std::size_t written = 0;
  std::size_t skipped = 0;
};

struct RunSummary {
  std::vector<Stage> stages;
  std::size_t embeddings_computed = 0;
  std::size_t embedding_cache_hits = 0;
  std::vector<std::string> warnings;
};

struct VariantMatrix {
  std::string label;
  std::vector<std::string> symbols;  // ascending atomic number
  std::vector<int> atomic_numbers;
  std::vector<Family> families;
  std::vector<bool> empty_subset;
  Eigen::MatrixXd x;
};

struct VdwRow {
  std::string symbol;
  double truth = 0.0;
  double predicted = 0.0;
  double ci = 0.0;
  std::vector<double> runs;
};

struct VdwReport {
  std::string property;
  std::string variant;
  std::string units;
  std::vector<VdwRow> rows;
  std::vector<std::string> warnings;
};

struct TttRun {
  std::uint64_t seed = 0;
  SplitSpec split;
  TttResult result;
  double test_rmse = 0.0;
};

struct TttReport {
  std::string property;
  std::string variant;
  double missing_rate = 0.0;
  std::vector<TttRun> runs;
  double mean_rmse = 0.0;
  double ci = 0.0;
};

/// A working directory with records/, annotated/, summaries/, cache/,
/// embeddings/, reports/ and models/.
class Project {
 public:
  Project(ProjectConfig config, HttpTransport* transport = nullptr);

  const ProjectConfig& config() const { return config_; }
  std::filesystem::path path(const std::string& relative) const { return config_.work_dir / relative; }

  void fetch_missing_pages();
  StageCounts ingest(bool force);
  std::vector<ElementRecord> records() const;

  StageCounts tag(bool force, const std::optional<std::filesystem::path>& out_dir = {});
  StageCounts summarize(const std::vector<double>& ratios, bool force);
  StageCounts embed(const EmbedRequest& request, const std::vector<double>& ratios, bool force,
                    RunSummary* summary = nullptr);

  VariantMatrix load_variant(const std::string& label) const;
  std::vector<PropertyTable> properties() const;
  PropertyTable property(const std::string& name) const;

  FamilyReport entropy_report(const std::string& variant) const;
  Projection2D tsne_report(const std::string& variant) const;
  BudgetSweep budget_report(const std::string& variant, const std::string& property) const;
  SweepReport sweep_report(const std::string& variant, const std::string& property, Predictor predictor) const;
  OverlapMatrix overlap_report(const std::string& variant, std::size_t k) const;
  TttReport ttt_report(const std::string& variant, const std::string& property, double missing_rate,
                       int seeds) const;
  VdwReport vdw_report(const std::string& variant) const;
  /// Ranks every property that supports a fit and dumps models/<property>.json.
  std::vector<FeatureRanking> fit_rankings(const std::string& variant) const;

  /// Every default report into reports/.
  void analyze(RunSummary& summary);

  /// Lists every artifact under the work dir with SHA-256 digests.
  void write_manifest(const RunSummary& summary) const;

 private:
  std::unique_ptr<EmbeddingProvider> make_provider() const;
  SweepInput regression_input(const std::string& variant, const std::string& property) const;

  ProjectConfig config_;
  HttpTransport* transport_;
};

RunSummary run_pipeline(const ProjectConfig& config, const std::vector<Stage>& stages, bool force,
                        HttpTransport* transport = nullptr);

}  // namespace e2v
