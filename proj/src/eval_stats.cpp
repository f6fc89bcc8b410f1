#include "modan/eval_stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "modan/error.hpp"
#include "modan/seeding.hpp"

namespace modan {

std::vector<std::size_t> FoldPartition::test_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldPartition::train_rows(std::size_t fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) rows.push_back(i);
  }
  return rows;
}

std::uint64_t FoldPartition::hash() const {
  std::uint64_t h = splitmix64(k);
  for (auto f : assignment) h = splitmix64(h ^ f);
  return h;
}

FoldPartition kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kBadConfig, "need at least two folds");
  if (labels.size() < k) {
    throw Error(ErrorCode::kTooFewSamples, std::to_string(labels.size()) + " samples for " +
                                                std::to_string(k) + " folds");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  FoldPartition part;
  part.k = k;
  part.seed = seed;
  part.assignment.assign(labels.size(), 0);
  std::mt19937_64 rng(derive_seed(seed, "fold", 0));
  std::size_t next_fold = 0;
  for (int c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (auto idx : members) {
      part.assignment[idx] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return part;
}

double auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores(a) < scores(b); });

  // Walk groups of equal score; every positive beats all negatives seen in
  // earlier groups and ties with negatives in its own group.
  std::uint64_t positives = 0, negatives = 0, twice_wins = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores(order[j]) == scores(order[i])) {
      if (labels[order[j]] == 1) {
        ++group_pos;
      } else if (labels[order[j]] == 0) {
        ++group_neg;
      } else {
        throw Error(ErrorCode::kLabelCardinality, "AUC labels must be 0/1");
      }
      ++j;
    }
    twice_wins += group_pos * (2 * negatives + group_neg);
    positives += group_pos;
    negatives += group_neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kSingleClass, "AUC needs both classes");
  }
  return (static_cast<double>(twice_wins) / 2.0) /
         (static_cast<double>(positives) * static_cast<double>(negatives));
}

double CvReport::mean_summary() const {
  if (summary.empty()) return 0.0;
  return std::accumulate(summary.begin(), summary.end(), 0.0) / static_cast<double>(summary.size());
}

CvReport repeated_cv(const LabeledDataset& task, const MethodRunner& runner,
                     const FoldPartition& partition, std::size_t repeats,
                     std::uint64_t base_seed, std::string method_name) {
  if (partition.assignment.size() != task.size()) {
    throw Error(ErrorCode::kShapeMismatch, "partition does not cover the task");
  }
  CvReport report;
  report.method = std::move(method_name);
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<double> fold_aucs;
    // Hash of the memberships actually handed to the runner this repeat.
    std::uint64_t consumed = splitmix64(partition.k);
    for (std::size_t f = 0; f < partition.k; ++f) {
      const std::vector<std::size_t> test_rows = partition.test_rows(f);
      for (auto row : test_rows) consumed = splitmix64(consumed ^ (row * partition.k + f));
      const LabeledDataset train = task.subset(partition.train_rows(f));
      const LabeledDataset test = task.subset(test_rows);
      const CvContext ctx{r, f, base_seed + r};
      const Eigen::VectorXd scores = runner(train, test.features, ctx);
      fold_aucs.push_back(auc(scores, test.labels));
    }
    double sum = 0.0;
    for (double a : fold_aucs) sum += a;
    report.summary.push_back(sum / static_cast<double>(fold_aucs.size()));
    report.fold_aucs.push_back(std::move(fold_aucs));
    report.partition_hashes.push_back(consumed);
  }
  return report;
}

namespace {

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

ComparisonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kShapeMismatch, "paired samples differ in length");
  ComparisonResult result;

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  result.n_effective = n;
  if (n == 0) {
    result.degenerate = true;
    result.p_value = 1.0;
    return result;
  }

  // Average ranks of |d|, stored doubled so they stay integral.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<std::uint64_t> twice_rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    // ranks i+1 .. j, doubled average = i + 1 + j
    for (std::size_t t = i; t < j; ++t) twice_rank[order[t]] = i + 1 + j;
    const auto tied = static_cast<double>(j - i);
    tie_term += tied * tied * tied - tied;
    i = j;
  }

  std::uint64_t twice_plus = 0, twice_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    twice_total += twice_rank[i];
    if (diffs[i] > 0.0) twice_plus += twice_rank[i];
  }
  const std::uint64_t twice_minus = twice_total - twice_plus;
  result.w_plus = static_cast<double>(twice_plus) / 2.0;
  result.w_minus = static_cast<double>(twice_minus) / 2.0;
  const std::uint64_t twice_stat = std::min(twice_plus, twice_minus);
  result.statistic = static_cast<double>(twice_stat) / 2.0;

  if (n <= kWilcoxonExactLimit) {
    // counts[s] = number of sign assignments whose doubled positive rank sum is s.
    std::vector<double> counts(twice_total + 1, 0.0);
    counts[0] = 1.0;
    std::uint64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t r = twice_rank[i];
      for (std::uint64_t s = reach + 1; s-- > 0;) {
        if (counts[s] != 0.0) counts[s + r] += counts[s];
      }
      reach += r;
    }
    double tail = 0.0;
    for (std::uint64_t s = 0; s <= twice_stat; ++s) tail += counts[s];
    result.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    result.exact = true;
  } else {
    const auto nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    result.p_value = var > 0.0 ? std::min(1.0, normal_two_sided((result.statistic - mean) / std::sqrt(var)))
                               : 1.0;
    result.exact = false;
  }
  return result;
}

Projection2d project_2d(const Eigen::MatrixXd& embeddings) {
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index d = embeddings.cols();
  if (n < 3) throw Error(ErrorCode::kDegenerateData, "need at least three points");
  if (d < 1) throw Error(ErrorCode::kDegenerateData, "need at least one dimension");

  const Eigen::RowVectorXd mean = embeddings.colwise().mean();
  const Eigen::MatrixXd centered = embeddings.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateData, "eigendecomposition failed");
  }
  // Eigenvalues ascend.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  if (!(values(d - 1) > 1e-12 * scale)) {
    throw Error(ErrorCode::kDegenerateData, "data has rank 0");
  }

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
  Eigen::Vector2d variances = Eigen::Vector2d::Zero();
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.col(c) = v;
    variances(c) = std::max(0.0, values(d - 1 - c));
  }
  return {centered * basis, variances};
}

}  // namespace modan
