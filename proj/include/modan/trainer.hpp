#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "modan/contrastive_losses.hpp"
#include "modan/encoder.hpp"
#include "modan/label_codec.hpp"
#include "modan/optimizer.hpp"

namespace modan {

/// Feature vectors (one per row) with optional metadata supervision.
struct PretrainDataset {
  Matrix features;
  std::vector<MultiHotLabel> labels;  // empty, or one per row
  std::vector<int> class_ids;         // empty, or one per row

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

/// Binary downstream task.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

/// Vector-space stand-in for the two-crop image transform: each view draws
/// its own scale, additive noise and coordinate dropout.
struct AugmentationConfig {
  double gaussian_sigma = 0.05;
  double feature_dropout_p = 0.1;
  double scale_lo = 0.8;
  double scale_hi = 1.2;

  void validate() const;
};

Vector augment(const Vector& sample, const AugmentationConfig& aug, std::mt19937_64& rng);

std::pair<Vector, Vector> two_views(const Vector& sample, const AugmentationConfig& aug,
                                    std::mt19937_64& rng);

struct EncoderArchitecture {
  std::vector<std::size_t> hidden = {128};
  std::size_t embedding_dim = 64;
  bool projection_head = true;
  std::vector<std::size_t> projection_dims = {64, 32};

  void validate() const;
};

/// Randomly initialized backbone (no head) for the given input width.
EncoderModel fresh_encoder(const EncoderArchitecture& arch, std::size_t input_dim,
                           std::uint64_t seed);

enum class PretrainMethod { kMulSupCon, kInfoNce, kSupCon, kCrossEntropy };

std::string_view to_string(PretrainMethod method);
PretrainMethod parse_pretrain_method(std::string_view name);

struct PretrainConfig {
  PretrainMethod method = PretrainMethod::kMulSupCon;
  LossConfig loss;
  OptimizerSpec optimizer = OptimizerSpec::sgd(0.9, 1e-4);
  LrSchedule schedule = LrSchedule::constant(0.05);
  int epochs = 200;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  AugmentationConfig augmentation;
  EncoderArchitecture architecture;

  /// Per-method defaults from the pretraining table: T = 0.1 for the
  /// instance-contrastive baseline, Adam(1e-3) for cross-entropy.
  static PretrainConfig defaults_for(PretrainMethod method);

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  std::size_t anchors_skipped = 0;
};

struct PretrainResult {
  EncoderModel model;  // includes the pretraining head
  std::vector<EpochLog> log;
};

/// Throws EmptyCorpus, MissingLabels.
PretrainResult pretrain(const PretrainDataset& corpus, const PretrainConfig& cfg);

enum class DownstreamRegime { kFinetune, kLinearProbe };

struct DownstreamConfig {
  DownstreamRegime regime = DownstreamRegime::kFinetune;
  int epochs = 10;
  std::size_t batch_size = 32;
  OptimizerSpec optimizer = OptimizerSpec::adam();
  LrSchedule schedule = LrSchedule::step(1e-4, 5, 0.1);
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear d -> 1 scorer with sigmoid output; starts at zero.
struct ClassifierHead {
  Vector weight;
  double bias = 0.0;

  static ClassifierHead zeros(std::size_t dim) { return {Vector::Zero(static_cast<Eigen::Index>(dim)), 0.0}; }
  bool operator==(const ClassifierHead& o) const { return weight == o.weight && bias == o.bias; }
};

struct DownstreamResult {
  EncoderModel encoder;
  ClassifierHead head;
};

/// All backbone parameters and the head are trained; any pretraining head on
/// `encoder` is dropped first. Throws LabelCardinality.
DownstreamResult finetune(const EncoderModel& encoder, const LabeledDataset& task,
                          const DownstreamConfig& cfg);

/// Trains the head on frozen embeddings. Throws LabelCardinality.
ClassifierHead linear_probe(const EncoderModel& encoder, const LabeledDataset& task,
                            const DownstreamConfig& cfg);

/// Dispatches on cfg.regime.
DownstreamResult train_downstream(const EncoderModel& encoder, const LabeledDataset& task,
                                  const DownstreamConfig& cfg);

/// Sigmoid scores for each row of `samples`.
Vector predict_scores(const EncoderModel& encoder, const ClassifierHead& head,
                      const Matrix& samples);

}  // namespace modan
