#pragma once

// Contrastive objectives over a batch of two-view embeddings, each returning
// the loss value together with its exact gradient w.r.t. every view.
//
// All three contrastive losses share one per-anchor form:
//
//   l(a) = -(1/|P(a)|) * sum_{p in P(a)} w_ap * log softmax_{k != a}(z_a.z_k / T)[p]
//
// InfoNCE uses P(a) = {partner view}, w = 1. SupCon uses P(a) = same class,
// w = 1. MulSupCon uses P(a) = {p : w_ap >= tau} with w_ap the Jaccard
// similarity of the owning images' multi-hot labels. The batch value is the
// mean over anchors whose P(a) is non-empty.
//
// The MatrixBase overloads skip the unit-norm check so that finite-difference
// probes can evaluate the same function off the sphere.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "modan/error.hpp"
#include "modan/label_codec.hpp"

namespace modan {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct LossConfig {
  double temperature = 0.07;
  double threshold = 0.3;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error(ErrorCode::kBadConfig, "temperature must be > 0");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw Error(ErrorCode::kBadConfig, "threshold must lie in [0, 1]");
    }
  }
};

template <typename Scalar = double>
struct LossResult {
  Scalar value{0};
  DenseMatrix<Scalar> grad;
  std::size_t anchors_used = 0;
  std::size_t anchors_total = 0;

  std::size_t anchors_skipped() const { return anchors_total - anchors_used; }
};

/// For each view, the index of the other view of the same image. Throws
/// DegenerateBatch unless every image index in 0..N-1 appears exactly twice.
inline std::vector<std::size_t> view_partners(std::span<const std::size_t> image_of) {
  if (image_of.empty()) throw Error(ErrorCode::kDegenerateBatch, "batch has no views");
  if (image_of.size() % 2 != 0) {
    throw Error(ErrorCode::kDegenerateBatch, "odd number of views");
  }
  const std::size_t n_images = image_of.size() / 2;
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> first(n_images, kNone), second(n_images, kNone);
  for (std::size_t v = 0; v < image_of.size(); ++v) {
    const std::size_t img = image_of[v];
    if (img >= n_images) {
      throw Error(ErrorCode::kDegenerateBatch,
                  "image index " + std::to_string(img) + " out of range");
    }
    if (first[img] == kNone) {
      first[img] = v;
    } else if (second[img] == kNone) {
      second[img] = v;
    } else {
      throw Error(ErrorCode::kDegenerateBatch,
                  "image " + std::to_string(img) + " has more than two views");
    }
  }
  std::vector<std::size_t> partner(image_of.size());
  for (std::size_t i = 0; i < n_images; ++i) {
    if (second[i] == kNone) {
      throw Error(ErrorCode::kDegenerateBatch,
                  "image " + std::to_string(i) + " does not have two views");
    }
    partner[first[i]] = second[i];
    partner[second[i]] = first[i];
  }
  return partner;
}

/// 2N L2-normalized view embeddings (one per row) with the view -> image map.
template <typename Scalar = double>
class EmbeddingBatch {
 public:
  using Matrix = DenseMatrix<Scalar>;

  static constexpr double kNormTolerance = 1e-6;

  EmbeddingBatch(Matrix views, std::vector<std::size_t> image_of)
      : views_(std::move(views)), image_of_(std::move(image_of)) {
    if (static_cast<std::size_t>(views_.rows()) != image_of_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "views and image map disagree in length");
    }
    if (views_.cols() < 2) throw Error(ErrorCode::kDegenerateBatch, "embedding dim must be >= 2");
    partner_ = view_partners(image_of_);
    for (Eigen::Index r = 0; r < views_.rows(); ++r) {
      const double norm = static_cast<double>(views_.row(r).norm());
      if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
        throw Error(ErrorCode::kDegenerateBatch,
                    "view " + std::to_string(r) + " is not unit norm");
      }
    }
  }

  const Matrix& views() const noexcept { return views_; }
  const std::vector<std::size_t>& image_of() const noexcept { return image_of_; }
  std::size_t partner(std::size_t view) const { return partner_[view]; }
  std::size_t view_count() const noexcept { return image_of_.size(); }
  std::size_t image_count() const noexcept { return image_of_.size() / 2; }
  Eigen::Index dim() const noexcept { return views_.cols(); }

 private:
  Matrix views_;
  std::vector<std::size_t> image_of_;
  std::vector<std::size_t> partner_;
};

template <typename Derived>
DenseMatrix<typename Derived::Scalar> similarity_matrix(const Eigen::MatrixBase<Derived>& views) {
  return views * views.transpose();
}

template <typename Scalar>
DenseMatrix<Scalar> similarity_matrix(const EmbeddingBatch<Scalar>& batch) {
  return similarity_matrix(batch.views());
}

/// Shared kernel. `positives(a, p)` selects P(a); `weights(a, p)` is w_ap.
/// The diagonal of `positives` is ignored.
template <typename Derived, typename WeightDerived>
LossResult<typename Derived::Scalar> weighted_contrastive(
    const Eigen::MatrixBase<Derived>& views, const BoolMatrix& positives,
    const Eigen::MatrixBase<WeightDerived>& weights, double temperature) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = views.rows();
  if (n < 2) throw Error(ErrorCode::kDegenerateBatch, "need at least two views");
  if (positives.rows() != n || positives.cols() != n || weights.rows() != n ||
      weights.cols() != n) {
    throw Error(ErrorCode::kShapeMismatch, "positive mask / weights must be 2N x 2N");
  }
  if (!(temperature > 0.0)) throw Error(ErrorCode::kBadConfig, "temperature must be > 0");

  const Scalar inv_t = Scalar(1) / Scalar(temperature);
  const DenseMatrix<Scalar> logits = (views * views.transpose()) * inv_t;

  // dL/dS, the gradient w.r.t. the similarity matrix, row a from anchor a.
  DenseMatrix<Scalar> coeff = DenseMatrix<Scalar>::Zero(n, n);
  std::vector<Scalar> anchor_loss(static_cast<std::size_t>(n), Scalar(0));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::vector<Scalar> prob(static_cast<std::size_t>(n));

  for (Eigen::Index a = 0; a < n; ++a) {
    std::size_t count = 0;
    Scalar weight_sum(0);
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p != a && positives(a, p)) {
        ++count;
        weight_sum += Scalar(weights(a, p));
      }
    }
    if (count == 0) continue;
    used[static_cast<std::size_t>(a)] = true;

    Scalar row_max = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != a) row_max = std::max(row_max, logits(a, k));
    }
    Scalar sum(0);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == a) continue;
      prob[static_cast<std::size_t>(k)] = std::exp(logits(a, k) - row_max);
      sum += prob[static_cast<std::size_t>(k)];
    }
    const Scalar log_denominator = row_max + std::log(sum);

    const Scalar inv_count = Scalar(1) / Scalar(count);
    Scalar loss(0);
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p != a && positives(a, p)) {
        loss -= Scalar(weights(a, p)) * (logits(a, p) - log_denominator);
      }
    }
    anchor_loss[static_cast<std::size_t>(a)] = loss * inv_count;

    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == a) continue;
      Scalar g = weight_sum * inv_count * prob[static_cast<std::size_t>(k)] / sum;
      if (positives(a, k)) g -= Scalar(weights(a, k)) * inv_count;
      coeff(a, k) = g * inv_t;
    }
  }

  LossResult<Scalar> result;
  result.anchors_total = static_cast<std::size_t>(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    if (used[static_cast<std::size_t>(a)]) {
      result.value += anchor_loss[static_cast<std::size_t>(a)];
      ++result.anchors_used;
    }
  }
  if (result.anchors_used == 0) {
    result.grad = DenseMatrix<Scalar>::Zero(n, views.cols());
    return result;
  }
  const Scalar inv_used = Scalar(1) / Scalar(result.anchors_used);
  result.value *= inv_used;
  coeff *= inv_used;
  result.grad = (coeff + coeff.transpose()) * views;
  return result;
}

template <typename Derived>
LossResult<typename Derived::Scalar> info_nce(const Eigen::MatrixBase<Derived>& views,
                                              std::span<const std::size_t> image_of,
                                              double temperature) {
  using Scalar = typename Derived::Scalar;
  const auto partner = view_partners(image_of);
  const Eigen::Index n = views.rows();
  if (static_cast<std::size_t>(n) != image_of.size()) {
    throw Error(ErrorCode::kShapeMismatch, "views and image map disagree in length");
  }
  BoolMatrix positives = BoolMatrix::Constant(n, n, false);
  for (Eigen::Index a = 0; a < n; ++a) {
    positives(a, static_cast<Eigen::Index>(partner[static_cast<std::size_t>(a)])) = true;
  }
  return weighted_contrastive(views, positives, DenseMatrix<Scalar>::Ones(n, n), temperature);
}

template <typename Scalar>
LossResult<Scalar> info_nce(const EmbeddingBatch<Scalar>& batch, double temperature) {
  return info_nce(batch.views(), batch.image_of(), temperature);
}

/// Single-label supervised contrastive loss; `classes` holds one id per image.
template <typename Derived>
LossResult<typename Derived::Scalar> supcon(const Eigen::MatrixBase<Derived>& views,
                                            std::span<const std::size_t> image_of,
                                            std::span<const int> classes, double temperature) {
  using Scalar = typename Derived::Scalar;
  view_partners(image_of);
  const Eigen::Index n = views.rows();
  if (static_cast<std::size_t>(n) != image_of.size()) {
    throw Error(ErrorCode::kShapeMismatch, "views and image map disagree in length");
  }
  if (classes.size() != image_of.size() / 2) {
    throw Error(ErrorCode::kShapeMismatch, "need one class id per image");
  }
  BoolMatrix positives(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index p = 0; p < n; ++p) {
      positives(a, p) = p != a && classes[image_of[static_cast<std::size_t>(a)]] ==
                                      classes[image_of[static_cast<std::size_t>(p)]];
    }
  }
  return weighted_contrastive(views, positives, DenseMatrix<Scalar>::Ones(n, n), temperature);
}

template <typename Scalar>
LossResult<Scalar> supcon(const EmbeddingBatch<Scalar>& batch, std::span<const int> classes,
                          double temperature) {
  return supcon(batch.views(), batch.image_of(), classes, temperature);
}

/// w[a][p] = Jaccard of the labels owning views a and p.
template <typename Scalar = double>
struct PairWeightMatrix {
  DenseMatrix<Scalar> w;
};

template <typename Scalar = double>
PairWeightMatrix<Scalar> jaccard_weights(std::span<const MultiHotLabel> labels,
                                         std::span<const std::size_t> image_of) {
  const std::size_t n_images = labels.size();
  DenseMatrix<Scalar> image_w(n_images, n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    for (std::size_t j = i; j < n_images; ++j) {
      const Scalar v = Scalar(jaccard(labels[i], labels[j]));
      image_w(i, j) = v;
      image_w(j, i) = v;
    }
  }
  const auto n = static_cast<Eigen::Index>(image_of.size());
  PairWeightMatrix<Scalar> out{DenseMatrix<Scalar>(n, n)};
  for (Eigen::Index a = 0; a < n; ++a) {
    const std::size_t ia = image_of[static_cast<std::size_t>(a)];
    if (ia >= n_images) throw Error(ErrorCode::kShapeMismatch, "view maps to a missing label");
    for (Eigen::Index p = 0; p < n; ++p) {
      out.w(a, p) = image_w(ia, image_of[static_cast<std::size_t>(p)]);
    }
  }
  return out;
}

/// P_tau(a): p != a and w_ap >= tau.
template <typename Scalar>
BoolMatrix positive_mask(const PairWeightMatrix<Scalar>& weights, double tau) {
  const Eigen::Index n = weights.w.rows();
  BoolMatrix mask(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index p = 0; p < n; ++p) {
      mask(a, p) = p != a && static_cast<double>(weights.w(a, p)) >= tau;
    }
  }
  return mask;
}

/// Jaccard-weighted multi-label supervised contrastive loss.
template <typename Derived>
LossResult<typename Derived::Scalar> mulsupcon(const Eigen::MatrixBase<Derived>& views,
                                               std::span<const std::size_t> image_of,
                                               std::span<const MultiHotLabel> labels,
                                               const LossConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  view_partners(image_of);
  if (static_cast<std::size_t>(views.rows()) != image_of.size()) {
    throw Error(ErrorCode::kShapeMismatch, "views and image map disagree in length");
  }
  if (labels.size() != image_of.size() / 2) {
    throw Error(ErrorCode::kShapeMismatch, "need one label per image");
  }
  const auto weights = jaccard_weights<Scalar>(labels, image_of);
  return weighted_contrastive(views, positive_mask(weights, cfg.threshold), weights.w,
                              cfg.temperature);
}

template <typename Scalar>
LossResult<Scalar> mulsupcon(const EmbeddingBatch<Scalar>& batch,
                             std::span<const MultiHotLabel> labels, const LossConfig& cfg) {
  return mulsupcon(batch.views(), batch.image_of(), labels, cfg);
}

/// Mean softmax cross-entropy; one row of logits per sample.
template <typename Derived>
LossResult<typename Derived::Scalar> cross_entropy(const Eigen::MatrixBase<Derived>& logits,
                                                   std::span<const int> targets) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = logits.rows();
  const Eigen::Index classes = logits.cols();
  if (n == 0) throw Error(ErrorCode::kDegenerateBatch, "empty batch");
  if (classes < 2) throw Error(ErrorCode::kShapeMismatch, "need at least two classes");
  if (targets.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::kShapeMismatch, "need one target per row");
  }
  LossResult<Scalar> result;
  result.grad.resize(n, classes);
  result.anchors_total = result.anchors_used = static_cast<std::size_t>(n);
  const Scalar inv_n = Scalar(1) / Scalar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= classes) {
      throw Error(ErrorCode::kBadTarget, "target " + std::to_string(t) + " at row " +
                                             std::to_string(i) + " out of range");
    }
    const Scalar row_max = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - row_max).exp();
    const Scalar sum = shifted.sum();
    result.value += (row_max + std::log(sum) - logits(i, t)) * inv_n;
    result.grad.row(i) = shifted.matrix() * (inv_n / sum);
    result.grad(i, t) -= inv_n;
  }
  return result;
}

}  // namespace modan
