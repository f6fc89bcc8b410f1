#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <random>
#include <vector>

#include "loss_oracle.hpp"
#include "modan/label_codec.hpp"

namespace fixtures {

inline Eigen::MatrixXd unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = g(rng);
    z.row(i).normalize();
  }
  return z;
}

inline Eigen::MatrixXd normalized(Eigen::MatrixXd m) {
  m.rowwise().normalize();
  return m;
}

// Views 2i and 2i+1 belong to image i.
inline std::vector<std::size_t> paired(std::size_t n_images) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_images; ++i) {
    out.push_back(i);
    out.push_back(i);
  }
  return out;
}

inline oracle::Rows to_rows(const Eigen::MatrixXd& m) {
  oracle::Rows rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(m(i, j));
  }
  return rows;
}

inline std::vector<oracle::Bits> to_bits(const std::vector<modan::MultiHotLabel>& labels) {
  std::vector<oracle::Bits> out;
  for (const auto& l : labels) {
    oracle::Bits b;
    for (std::size_t i = 0; i < l.size(); ++i) b.push_back(l[i] ? 1 : 0);
    out.push_back(b);
  }
  return out;
}

// Random multi-hot labels with one modality bit and one anatomy bit.
inline std::vector<modan::MultiHotLabel> random_labels(const modan::MetadataVocabulary& vocab,
                                                       std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> mod(0, vocab.modalities().size() - 1);
  std::uniform_int_distribution<std::size_t> anat(0, vocab.anatomies().size() - 1);
  std::vector<modan::MultiHotLabel> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(modan::encode(vocab.modalities()[mod(rng)], vocab.anatomies()[anat(rng)], vocab));
  }
  return out;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

// Max relative error of two gradient arrays, measured against the larger norm.
inline double grad_rel_err(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

// Central differences of f over every entry of x.
template <typename F>
Eigen::MatrixXd central_diff(const Eigen::MatrixXd& x, F&& f, double h = 1e-4) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  Eigen::MatrixXd probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + h;
      const double up = f(probe);
      probe(i, j) = x(i, j) - h;
      const double down = f(probe);
      probe(i, j) = x(i, j);
      out(i, j) = (up - down) / (2 * h);
    }
  }
  return out;
}

}  // namespace fixtures
