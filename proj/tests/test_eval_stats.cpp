#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "modan/error.hpp"
#include "modan/eval_stats.hpp"
#include "modan/synthetic.hpp"

using namespace modan;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

double brute_auc(const Eigen::VectorXd& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
      if (s(a) > s(b)) wins += 1.0;
      if (s(a) == s(b)) wins += 0.5;
    }
  }
  return wins / pairs;
}

std::vector<int> labels_with(std::size_t n, std::size_t positives) {
  std::vector<int> y(n, 0);
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  std::mt19937_64 rng(n);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

LabeledDataset random_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  LabeledDataset t;
  t.features.resize(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < t.features.size(); ++i) t.features(i) = g(rng);
  t.labels = labels_with(n, n / 3);
  for (std::size_t i = 0; i < n; ++i) t.features(static_cast<Eigen::Index>(i), 0) = t.labels[i];
  return t;
}

const MetadataVocabulary kVocab({"CT", "MR", "US"}, {"abdomen", "knee", "thyroid"});

Manifest class_manifest(const std::vector<std::pair<int, std::size_t>>& counts) {
  Manifest m{MetadataVocabulary({"CT"}, {"knee"}), {}};
  int next = 0;
  for (auto [cls, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      ManifestRow row;
      row.id = "r" + std::to_string(next++);
      row.modality = "CT";
      row.anatomy = "knee";
      row.class_id = cls;
      row.features = {static_cast<double>(next)};
      m.rows.push_back(row);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("kfold_split examples") {
  const std::vector<int> balanced{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const FoldPartition p = kfold_split(balanced, 5, 3);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto rows = p.test_rows(f);
    REQUIRE(rows.size() == 2);
    CHECK(balanced[rows[0]] + balanced[rows[1]] == 1);
  }
  CHECK(kfold_split(balanced, 5, 3).assignment == p.assignment);
  CHECK(kfold_split(balanced, 5, 3).hash() == p.hash());

  const auto thyroid = labels_with(349, 61);
  const FoldPartition t = kfold_split(thyroid, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t pos = 0;
    for (auto r : t.test_rows(f)) pos += static_cast<std::size_t>(thyroid[r]);
    CHECK((pos == 12 || pos == 13));
  }

  CHECK(code_of([] { kfold_split({0, 1, 0}, 5, 0); }) == ErrorCode::kTooFewSamples);
}

TEST_CASE("kfold_split invariants over random label vectors") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 200;
    const std::size_t k = 2 + rng() % 5;
    if (n < k) continue;
    const auto y = labels_with(n, rng() % (n + 1));
    const FoldPartition p = kfold_split(y, k, trial);
    std::vector<std::size_t> size(k), pos(k);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(p.assignment[i] < k);
      ++size[p.assignment[i]];
      pos[p.assignment[i]] += static_cast<std::size_t>(y[i]);
    }
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
    CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
    for (std::size_t f = 0; f < k; ++f) {
      CHECK(p.test_rows(f).size() + p.train_rows(f).size() == n);
    }
  }
}

TEST_CASE("auc examples and properties") {
  Eigen::VectorXd s(4);
  s << 0.1, 0.4, 0.35, 0.8;
  CHECK(auc(s, {0, 0, 1, 1}) == 0.75);
  s << 0.1, 0.2, 0.3, 0.4;
  CHECK(auc(s, {0, 0, 1, 1}) == 1.0);
  CHECK(auc(Eigen::VectorXd::Constant(4, 0.3), {0, 1, 0, 1}) == 0.5);
  CHECK(code_of([&] { auc(s, {1, 1, 1, 1}); }) == ErrorCode::kSingleClass);
  CHECK(code_of([&] { auc(s, {0, 1, 2, 1}); }) == ErrorCode::kLabelCardinality);
  CHECK(code_of([&] { auc(s, {0, 1, 1}); }) == ErrorCode::kShapeMismatch);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    y[0] = 0;
    y[1] = 1;
    Eigen::VectorXd sc(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < sc.size(); ++i) sc(i) = static_cast<double>(rng() % 7) / 7.0;
    CHECK(auc(sc, y) == brute_auc(sc, y));
    const Eigen::VectorXd warped = sc.unaryExpr([](double v) { return std::exp(3.0 * v); });
    CHECK(auc(warped, y) == auc(sc, y));
  }

  std::normal_distribution<double> g;
  Eigen::VectorXd distinct(30);
  for (Eigen::Index i = 0; i < 30; ++i) distinct(i) = g(rng);
  const auto y = labels_with(30, 11);
  CHECK(auc(distinct, y) + auc(-distinct, y) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("repeated_cv with constant and oracle predictors") {
  const LabeledDataset task = random_task(60, 2);
  const FoldPartition p = kfold_split(task.labels, 5, 9);
  const MethodRunner constant = [](const LabeledDataset&, const Eigen::MatrixXd& test, const CvContext&) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(test.rows(), 0.42));
  };
  const MethodRunner oracle = [](const LabeledDataset&, const Eigen::MatrixXd& test, const CvContext&) {
    return Eigen::VectorXd(test.col(0));
  };
  const CvReport c = repeated_cv(task, constant, p, 10, 100, "constant");
  const CvReport o = repeated_cv(task, oracle, p, 10, 100, "oracle");
  REQUIRE(c.summary.size() == 10);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(c.summary[r] == 0.5);
    CHECK(o.summary[r] == 1.0);
    for (double a : c.fold_aucs[r]) CHECK(a == 0.5);
    CHECK(c.fold_aucs[r].size() == 5);
  }
  CHECK(c.partition_hashes == o.partition_hashes);
  CHECK(std::all_of(c.partition_hashes.begin(), c.partition_hashes.end(),
                    [&](std::uint64_t h) { return h == c.partition_hashes.front(); }));

  const FoldPartition other = kfold_split(task.labels, 5, 10);
  CHECK(repeated_cv(task, constant, other, 1, 100).partition_hashes.front() != c.partition_hashes.front());
}

TEST_CASE("repeated_cv seeds and reproducibility") {
  const LabeledDataset task = random_task(40, 3);
  const FoldPartition p = kfold_split(task.labels, 5, 1);
  std::vector<std::uint64_t> seen;
  const MethodRunner noisy = [&seen](const LabeledDataset& train, const Eigen::MatrixXd& test, const CvContext& ctx) {
    seen.push_back(ctx.seed);
    std::mt19937_64 rng(ctx.seed * 31 + ctx.fold + train.size());
    std::normal_distribution<double> g;
    Eigen::VectorXd s(test.rows());
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = test(i, 0) + g(rng);
    return s;
  };
  const CvReport a = repeated_cv(task, noisy, p, 3, 50);
  const std::vector<std::uint64_t> expect_seeds{50, 50, 50, 50, 50, 51, 51, 51, 51, 51, 52, 52, 52, 52, 52};
  CHECK(seen == expect_seeds);
  const CvReport b = repeated_cv(task, noisy, p, 3, 50);
  CHECK(a.summary == b.summary);
  CHECK(a.fold_aucs == b.fold_aucs);
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (double v : a.fold_aucs[r]) sum += v;
    CHECK(a.summary[r] == doctest::Approx(sum / 5.0).epsilon(1e-15));
  }
}

TEST_CASE("wilcoxon examples") {
  const std::vector<double> y(10, 0.5);
  std::vector<double> x(10);
  for (std::size_t i = 0; i < 10; ++i) x[i] = 0.6 + 0.01 * static_cast<double>(i);
  const auto all_pos = wilcoxon_signed_rank(x, y);
  CHECK(all_pos.p_value == 0.001953125);
  CHECK(all_pos.exact);
  CHECK(all_pos.w_plus == 55.0);
  CHECK(all_pos.w_minus == 0.0);
  CHECK(all_pos.statistic == 0.0);

  const auto same = wilcoxon_signed_rank(y, y);
  CHECK(same.degenerate);
  CHECK(same.p_value == 1.0);
  CHECK(same.n_effective == 0);

  std::vector<double> d;
  for (int k = 1; k <= 5; ++k) {
    d.push_back(k);
    d.push_back(-k);
  }
  const auto sym = wilcoxon_signed_rank(d, std::vector<double>(10, 0.0));
  CHECK(sym.w_plus == sym.w_minus);
  CHECK(sym.p_value == 1.0);

  CHECK(code_of([] { wilcoxon_signed_rank({1.0, 2.0}, {1.0}); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("wilcoxon exact p agrees with full sign enumeration at n = 10") {
  // Null distribution of W+ over the 1024 sign patterns of ranks 1..10.
  std::map<int, int> count;
  for (int mask = 0; mask < 1024; ++mask) {
    int w = 0;
    for (int r = 1; r <= 10; ++r)
      if (mask & (1 << (r - 1))) w += r;
    ++count[w];
  }
  for (int mask = 0; mask < 1024; ++mask) {
    std::vector<double> diff;
    for (int r = 1; r <= 10; ++r) diff.push_back((mask & (1 << (r - 1))) ? r * 0.01 : -r * 0.01);
    const auto res = wilcoxon_signed_rank(diff, std::vector<double>(10, 0.0));
    const int w = static_cast<int>(res.statistic);
    int tail = 0;
    for (auto [value, c] : count)
      if (value <= w) tail += c;
    const double brute = std::min(1.0, 2.0 * tail / 1024.0);
    CHECK(res.p_value == doctest::Approx(brute).epsilon(1e-15));
    CHECK(res.w_plus + res.w_minus == 55.0);
    CHECK((res.statistic <= 8.0) == (res.p_value <= 0.05));
  }
}

TEST_CASE("wilcoxon ties, affine invariance and the large-sample branch") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(10), y(10), x2(10), y2(10);
    for (std::size_t i = 0; i < 10; ++i) {
      x[i] = std::round(g(rng) * 4.0) / 4.0;
      y[i] = std::round(g(rng) * 4.0) / 4.0;
      x2[i] = 2.0 * x[i] + 8.0;
      y2[i] = 2.0 * y[i] + 8.0;
    }
    const auto a = wilcoxon_signed_rank(x, y);
    const auto b = wilcoxon_signed_rank(x2, y2);
    CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
    CHECK(a.p_value > 0.0);
    CHECK(a.p_value <= 1.0);
    if (!a.degenerate) {
      const double n = static_cast<double>(a.n_effective);
      CHECK(a.w_plus + a.w_minus == doctest::Approx(n * (n + 1) / 2));
    }
  }

  std::vector<double> x(40), y(40, 0.0);
  for (std::size_t i = 0; i < 40; ++i) x[i] = g(rng) + 0.8;
  const auto big = wilcoxon_signed_rank(x, y);
  CHECK_FALSE(big.exact);
  CHECK(big.p_value < 0.01);
}

TEST_CASE("hierarchical generator") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.seed = 3;
  const SyntheticCorpus flat = generate_hierarchical_corpus(kVocab, cfg);
  REQUIRE(flat.pretrain.size() == 9 * 50);
  for (std::size_t i = 0; i < flat.pretrain.size(); ++i) {
    CHECK(flat.pretrain.features.row(static_cast<Eigen::Index>(i)) ==
          flat.cell_means.row(static_cast<Eigen::Index>(flat.cell_of[i])));
  }
  double min_dist = 1e300;
  for (Eigen::Index a = 0; a < flat.cell_means.rows(); ++a)
    for (Eigen::Index b = a + 1; b < flat.cell_means.rows(); ++b)
      min_dist = std::min(min_dist, (flat.cell_means.row(a) - flat.cell_means.row(b)).norm());
  CHECK(min_dist > 0.0);

  SynthConfig noisy;
  noisy.seed = 11;
  const SyntheticCorpus c = generate_hierarchical_corpus(kVocab, noisy);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(9, 16);
  std::vector<double> counts(9, 0.0);
  for (std::size_t i = 0; i < c.pretrain.size(); ++i) {
    centroids.row(static_cast<Eigen::Index>(c.cell_of[i])) += c.pretrain.features.row(static_cast<Eigen::Index>(i));
    counts[c.cell_of[i]] += 1.0;
  }
  for (Eigen::Index k = 0; k < 9; ++k) centroids.row(k) /= counts[static_cast<std::size_t>(k)];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < c.pretrain.size(); ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - c.pretrain.features.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
    correct += static_cast<std::size_t>(best) == c.cell_of[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(c.pretrain.size()) > 0.9);

  // Labels agree with the cell map and the task is two-class.
  for (std::size_t i = 0; i < c.pretrain.size(); ++i) {
    const auto cell = c.cell_of[i];
    CHECK(c.pretrain.labels[i] == encode(kVocab.modalities()[cell / 3], kVocab.anatomies()[cell % 3], kVocab));
    CHECK(c.pretrain.class_ids[i] == static_cast<int>(cell));
  }
  const auto positives = std::count(c.task.labels.begin(), c.task.labels.end(), 1);
  CHECK(positives > 0);
  CHECK(positives < static_cast<std::ptrdiff_t>(c.task.size()));

  const SyntheticCorpus again = generate_hierarchical_corpus(kVocab, noisy);
  CHECK(again.pretrain.features == c.pretrain.features);
  CHECK(again.task.features == c.task.features);

  SynthConfig bad;
  bad.latent_dim = 5;
  CHECK(code_of([&] { generate_hierarchical_corpus(kVocab, bad); }) == ErrorCode::kBadConfig);
}

TEST_CASE("cap_per_class") {
  const Manifest m = class_manifest({{0, 40}, {1, 250}});
  const Manifest capped = cap_per_class(m, 100, 5);
  std::map<int, int> per_class;
  for (const auto& row : capped.rows) ++per_class[*row.class_id];
  CHECK(per_class[0] == 40);
  CHECK(per_class[1] == 100);
  CHECK(cap_per_class(m, 100, 5) == capped);
  CHECK_FALSE(cap_per_class(m, 100, 6) == capped);
  for (std::size_t i = 1; i < capped.rows.size(); ++i) {
    CHECK(std::stoi(capped.rows[i - 1].id.substr(1)) < std::stoi(capped.rows[i].id.substr(1)));
  }
}

TEST_CASE("project_2d") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;

  Eigen::MatrixXd flat(20, 2);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = g(rng);
  const Projection2d pf = project_2d(flat);
  for (Eigen::Index a = 0; a < 20; ++a)
    for (Eigen::Index b = 0; b < 20; ++b)
      CHECK(std::abs((pf.coords.row(a) - pf.coords.row(b)).norm() - (flat.row(a) - flat.row(b)).norm()) < 1e-9);
  CHECK(pf.variances(0) >= pf.variances(1));

  Eigen::MatrixXd line(30, 5);
  Eigen::RowVectorXd dir(5);
  dir << 1, -2, 0.5, 3, 1;
  for (Eigen::Index i = 0; i < 30; ++i) line.row(i) = g(rng) * dir + Eigen::RowVectorXd::Constant(5, 2.0);
  const Projection2d pl = project_2d(line);
  CHECK(pl.variances(1) < 1e-12 * pl.variances(0));

  Eigen::MatrixXd gauss(2000, 4);
  const double sd[4] = {2.0, 1.0, std::sqrt(0.1), 0.1};
  for (Eigen::Index i = 0; i < 2000; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) gauss(i, j) = sd[j] * g(rng);
  const Projection2d pg = project_2d(gauss);
  CHECK(std::abs(pg.variances(0) - 4.0) < 0.15 * 4.0);
  CHECK(pg.coords.rows() == 2000);

  CHECK(code_of([] { project_2d(Eigen::MatrixXd::Ones(5, 3)); }) == ErrorCode::kDegenerateData);
  CHECK(code_of([] { project_2d(Eigen::MatrixXd::Random(2, 3)); }) == ErrorCode::kDegenerateData);
}
