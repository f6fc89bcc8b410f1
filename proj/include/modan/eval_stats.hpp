#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "modan/trainer.hpp"

namespace modan {

/// Fixed k-fold assignment, stratified by binary label.
struct FoldPartition {
  std::size_t k = 5;
  std::vector<std::size_t> assignment;  // sample -> fold
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_rows(std::size_t fold) const;
  std::vector<std::size_t> train_rows(std::size_t fold) const;
  std::uint64_t hash() const;
};

/// Stratified split: each class is shuffled and dealt round-robin, continuing
/// from the fold where the previous class stopped, so fold sizes and per-class
/// fold counts both differ by at most one. Throws TooFewSamples when n < k.
FoldPartition kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed);

/// Mann-Whitney AUC: (wins + ties / 2) / (P * N). Throws SingleClass.
double auc(const Eigen::VectorXd& scores, const std::vector<int>& labels);

struct CvContext {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::uint64_t seed = 0;  // base_seed + repeat
};

/// Trains on `train` and returns one score per row of `test_features`.
using MethodRunner = std::function<Eigen::VectorXd(const LabeledDataset& train,
                                                   const Eigen::MatrixXd& test_features,
                                                   const CvContext& ctx)>;

struct CvReport {
  std::string method;
  std::vector<double> summary;                // one per repeat: mean of the fold AUCs
  std::vector<std::vector<double>> fold_aucs; // [repeat][fold]
  std::vector<std::uint64_t> partition_hashes; // per repeat, for the fixed-partition check
  std::string config_fingerprint;

  double mean_summary() const;
};

/// Repeat r trains with seed base_seed + r on the identical partition.
CvReport repeated_cv(const LabeledDataset& task, const MethodRunner& runner,
                     const FoldPartition& partition, std::size_t repeats,
                     std::uint64_t base_seed, std::string method_name = {});

struct ComparisonResult {
  std::string method_a;
  std::string method_b;
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_effective = 0;
  bool exact = true;
  bool degenerate = false;  // every difference was zero
};

/// Largest n for which the exact null distribution is used.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided signed-rank test on x - y. Zero differences are dropped, tied
/// magnitudes get average ranks. For n_eff <= 25 the p-value is exact over
/// all 2^n sign assignments (counted by a rank-sum recurrence); beyond that a
/// tie-corrected normal approximation is used.
ComparisonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

struct Projection2d {
  Eigen::MatrixXd coords;     // n x 2
  Eigen::Vector2d variances;  // along each component, non-increasing
};

/// Mean-centered projection onto the top two principal components. Each
/// component's sign is fixed so its largest-magnitude loading is positive.
/// Throws DegenerateData when n < 3 or the data has rank 0.
Projection2d project_2d(const Eigen::MatrixXd& embeddings);

}  // namespace modan
