#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "modan/config.hpp"
#include "modan/eval_stats.hpp"
#include "modan/manifest.hpp"

namespace modan {

struct EvaluationResult {
  std::vector<CvReport> reports;              // in config method order
  std::map<std::string, ComparisonResult> vs_proposed;  // keyed by baseline name
  FoldPartition partition;
  std::string proposed;
  std::string regime;
  std::map<std::string, std::vector<EpochLog>> pretrain_logs;

  const CvReport& report(const std::string& method) const;
};

/// Full comparison: pretrain each listed method once on `corpus`, then run the
/// repeated k-fold protocol for every method on `task` using one shared
/// partition, and compare each baseline with the proposed method.
EvaluationResult run_evaluation(const RunConfig& cfg, const Manifest& corpus, const Manifest& task);

/// Loads both manifests named by the config.
EvaluationResult run_evaluation(const RunConfig& cfg);

/// `method<TAB>mean_auc<TAB>p_vs_proposed`, one row per method, 6 decimals.
/// The proposed method's own p column reads "-".
std::string format_report_table(const EvaluationResult& result);

/// Per-repeat and per-fold AUCs, partition hashes, comparison statistics and
/// flags, as JSON.
std::string format_report_detail(const EvaluationResult& result, const RunConfig& cfg);

/// `epoch<TAB>mean_loss<TAB>anchors_skipped` lines.
std::string format_loss_log(const std::vector<EpochLog>& log);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace modan
