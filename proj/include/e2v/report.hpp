#pragma once

#include "e2v/analysis.hpp"
#include "e2v/pipeline.hpp"

#include <filesystem>
#include <string>

namespace e2v {

/// A report as written to disk: the full structure as JSON and flat plot
/// data as CSV (one row per point).
struct ReportText {
  std::string json;
  std::string csv;
};

ReportText render_entropy(const FamilyReport& report, const VariantMatrix& data);
ReportText render_tsne(const Projection2D& projection, const VariantMatrix& data);
ReportText render_budget(const BudgetSweep& sweep, const std::string& variant, const std::string& property);
ReportText render_sweep(const SweepReport& report, const std::string& variant, const std::string& property,
                        const SweepConfig& config);
ReportText render_overlap(const OverlapMatrix& matrix, const std::string& variant);
ReportText render_ttt(const TttReport& report, const TttConfig& config);
ReportText render_vdw(const VdwReport& report, const TttConfig& config, double missing_rate);
std::string render_model(const LinearModel& model, const FeatureRanking& ranking, const std::string& variant);

/// Writes `<stem>.json` and `<stem>.csv`; `json_path` may carry either
/// extension or none.
void write_report(const std::filesystem::path& json_path, const ReportText& report);

}  // namespace e2v
