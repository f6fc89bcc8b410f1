#include "modan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "modan/error.hpp"
#include "modan/seeding.hpp"

namespace modan {

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

void AugmentationConfig::validate() const {
  if (!(gaussian_sigma >= 0.0)) throw Error(ErrorCode::kBadConfig, "gaussian_sigma must be >= 0");
  if (!(feature_dropout_p >= 0.0 && feature_dropout_p <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "feature_dropout_p must lie in [0, 1]");
  }
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) {
    throw Error(ErrorCode::kBadConfig, "scale_jitter must satisfy 0 < lo <= hi");
  }
}

Vector augment(const Vector& sample, const AugmentationConfig& aug, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale_dist(aug.scale_lo, aug.scale_hi);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double scale = aug.scale_lo == aug.scale_hi ? aug.scale_lo : scale_dist(rng);
  Vector view = scale * sample;
  if (aug.gaussian_sigma > 0.0) {
    for (Eigen::Index i = 0; i < view.size(); ++i) view(i) += aug.gaussian_sigma * noise(rng);
  }
  if (aug.feature_dropout_p > 0.0) {
    for (Eigen::Index i = 0; i < view.size(); ++i) {
      if (unit(rng) < aug.feature_dropout_p) view(i) = 0.0;
    }
  }
  return view;
}

std::pair<Vector, Vector> two_views(const Vector& sample, const AugmentationConfig& aug,
                                    std::mt19937_64& rng) {
  Vector first = augment(sample, aug, rng);
  Vector second = augment(sample, aug, rng);
  return {std::move(first), std::move(second)};
}

void EncoderArchitecture::validate() const {
  if (embedding_dim < 2) throw Error(ErrorCode::kBadConfig, "embedding_dim must be >= 2");
  for (auto h : hidden) {
    if (h == 0) throw Error(ErrorCode::kBadConfig, "hidden widths must be positive");
  }
  if (projection_head) {
    if (projection_dims.empty() || projection_dims.back() < 2) {
      throw Error(ErrorCode::kBadConfig, "projection head needs an output width >= 2");
    }
    for (auto h : projection_dims) {
      if (h == 0) throw Error(ErrorCode::kBadConfig, "projection widths must be positive");
    }
  }
}

namespace {

std::vector<std::size_t> backbone_dims(const EncoderArchitecture& arch, std::size_t input_dim) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
  dims.push_back(arch.embedding_dim);
  return dims;
}

}  // namespace

EncoderModel fresh_encoder(const EncoderArchitecture& arch, std::size_t input_dim,
                           std::uint64_t seed) {
  arch.validate();
  return EncoderModel::create(backbone_dims(arch, input_dim), HeadKind::kNone, {}, seed);
}

std::string_view to_string(PretrainMethod method) {
  switch (method) {
    case PretrainMethod::kMulSupCon: return "mulsupcon";
    case PretrainMethod::kInfoNce: return "infonce";
    case PretrainMethod::kSupCon: return "supcon";
    case PretrainMethod::kCrossEntropy: return "crossentropy";
  }
  return "unknown";
}

PretrainMethod parse_pretrain_method(std::string_view name) {
  for (auto m : {PretrainMethod::kMulSupCon, PretrainMethod::kInfoNce, PretrainMethod::kSupCon,
                 PretrainMethod::kCrossEntropy}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::kBadConfig, "unknown pretraining method '" + std::string(name) + "'");
}

PretrainConfig PretrainConfig::defaults_for(PretrainMethod method) {
  PretrainConfig cfg;
  cfg.method = method;
  if (method == PretrainMethod::kInfoNce) cfg.loss.temperature = 0.10;
  if (method == PretrainMethod::kCrossEntropy) {
    cfg.optimizer = OptimizerSpec::adam();
    cfg.schedule = LrSchedule::constant(1e-3);
  }
  return cfg;
}

void PretrainConfig::validate() const {
  loss.validate();
  optimizer.validate();
  schedule.validate();
  augmentation.validate();
  architecture.validate();
  if (epochs < 1) throw Error(ErrorCode::kBadConfig, "epochs must be >= 1");
  if (batch_size < 2) throw Error(ErrorCode::kBadConfig, "batch_size must be >= 2");
}

void DownstreamConfig::validate() const {
  optimizer.validate();
  schedule.validate();
  if (epochs < 0) throw Error(ErrorCode::kBadConfig, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kBadConfig, "batch_size must be >= 1");
}

namespace {

struct StepOutcome {
  double loss = 0.0;
  std::size_t skipped = 0;
  Vector grads;
};

void apply_update(EncoderModel& model, OptimizerState& state, const Vector& grads, double lr) {
  Vector params = flatten_parameters(model.layers());
  optimizer_step(state, params, grads, lr);
  unflatten_parameters(params, model.mutable_layers());
}

StepOutcome contrastive_step(const EncoderModel& model, const PretrainDataset& corpus,
                             const PretrainConfig& cfg, const std::vector<int>& dense_classes,
                             std::span<const std::size_t> batch, std::mt19937_64& aug_rng) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix views(2 * b, corpus.features.cols());
  std::vector<std::size_t> image_of(static_cast<std::size_t>(2 * b));
  for (Eigen::Index i = 0; i < b; ++i) {
    const Vector sample = corpus.features.row(static_cast<Eigen::Index>(batch[i])).transpose();
    auto [v1, v2] = two_views(sample, cfg.augmentation, aug_rng);
    views.row(2 * i) = v1.transpose();
    views.row(2 * i + 1) = v2.transpose();
    image_of[static_cast<std::size_t>(2 * i)] = static_cast<std::size_t>(i);
    image_of[static_cast<std::size_t>(2 * i + 1)] = static_cast<std::size_t>(i);
  }

  const ForwardCache cache = forward(model, views, ForwardTarget::kHead);
  // Validates norms and the two-views-per-image pairing every step.
  const EmbeddingBatch<double> emb(cache.output, image_of);

  LossResult<double> loss;
  switch (cfg.method) {
    case PretrainMethod::kInfoNce:
      loss = info_nce(emb, cfg.loss.temperature);
      break;
    case PretrainMethod::kSupCon: {
      std::vector<int> classes;
      for (auto idx : batch) classes.push_back(dense_classes[idx]);
      loss = supcon(emb, classes, cfg.loss.temperature);
      break;
    }
    case PretrainMethod::kMulSupCon: {
      std::vector<MultiHotLabel> labels;
      for (auto idx : batch) labels.push_back(corpus.labels[idx]);
      loss = mulsupcon(emb, labels, cfg.loss);
      break;
    }
    case PretrainMethod::kCrossEntropy:
      break;
  }
  return {loss.value, loss.anchors_skipped(), flatten_gradients(backward(model, cache, loss.grad))};
}

StepOutcome cross_entropy_step(const EncoderModel& model, const PretrainDataset& corpus,
                               const PretrainConfig& cfg, const std::vector<int>& dense_classes,
                               std::span<const std::size_t> batch, std::mt19937_64& aug_rng) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix views(b, corpus.features.cols());
  std::vector<int> targets;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Vector sample = corpus.features.row(static_cast<Eigen::Index>(batch[i])).transpose();
    views.row(i) = augment(sample, cfg.augmentation, aug_rng).transpose();
    targets.push_back(dense_classes[batch[i]]);
  }
  const ForwardCache cache = forward(model, views, ForwardTarget::kHead);
  const auto loss = cross_entropy(cache.output, targets);
  return {loss.value, 0, flatten_gradients(backward(model, cache, loss.grad))};
}

std::vector<int> densify_classes(const std::vector<int>& ids, std::size_t& class_count) {
  std::map<int, int> remap;
  for (int id : ids) remap.emplace(id, 0);
  int next = 0;
  for (auto& [id, dense] : remap) dense = next++;
  class_count = remap.size();
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(remap[id]);
  return out;
}

}  // namespace

PretrainResult pretrain(const PretrainDataset& corpus, const PretrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = corpus.size();
  if (n == 0) throw Error(ErrorCode::kEmptyCorpus, "pretraining corpus has no rows");
  const auto method_name = std::string(to_string(cfg.method));
  if (cfg.method == PretrainMethod::kMulSupCon && corpus.labels.size() != n) {
    throw Error(ErrorCode::kMissingLabels, method_name + " needs modality/anatomy labels");
  }
  if ((cfg.method == PretrainMethod::kSupCon || cfg.method == PretrainMethod::kCrossEntropy) &&
      corpus.class_ids.size() != n) {
    throw Error(ErrorCode::kMissingLabels, method_name + " needs class_id for every row");
  }

  std::size_t class_count = 0;
  const std::vector<int> dense_classes = densify_classes(corpus.class_ids, class_count);
  if (cfg.method == PretrainMethod::kCrossEntropy && class_count < 2) {
    throw Error(ErrorCode::kMissingLabels, "crossentropy needs at least two classes");
  }

  const auto& arch = cfg.architecture;
  const auto dims = backbone_dims(arch, static_cast<std::size_t>(corpus.features.cols()));
  const std::uint64_t init_seed = derive_seed(cfg.seed, "init", 0);
  EncoderModel model;
  if (cfg.method == PretrainMethod::kCrossEntropy) {
    model = EncoderModel::create(dims, HeadKind::kClassifier, {class_count}, init_seed);
  } else if (arch.projection_head) {
    model = EncoderModel::create(dims, HeadKind::kProjection, arch.projection_dims, init_seed);
  } else {
    model = EncoderModel::create(dims, HeadKind::kNone, {}, init_seed);
  }

  OptimizerState state(cfg.optimizer, static_cast<Eigen::Index>(model.parameter_count()));
  std::vector<std::size_t> order(n);
  PretrainResult result;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::mt19937_64 aug_rng(derive_seed(cfg.seed, "augment", static_cast<std::uint64_t>(epoch)));
    const double lr = lr_at(cfg.schedule, epoch);

    EpochLog log{epoch, 0.0, 0};
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const StepOutcome step =
          cfg.method == PretrainMethod::kCrossEntropy
              ? cross_entropy_step(model, corpus, cfg, dense_classes, batch, aug_rng)
              : contrastive_step(model, corpus, cfg, dense_classes, batch, aug_rng);
      apply_update(model, state, step.grads, lr);
      log.mean_loss += step.loss;
      log.anchors_skipped += step.skipped;
      ++steps;
    }
    log.mean_loss /= static_cast<double>(steps);
    result.log.push_back(log);
  }
  result.model = std::move(model);
  return result;
}

namespace {

void check_binary(const LabeledDataset& task) {
  if (task.labels.size() != task.size()) {
    throw Error(ErrorCode::kLabelCardinality, "need one task label per row");
  }
  for (std::size_t i = 0; i < task.labels.size(); ++i) {
    if (task.labels[i] != 0 && task.labels[i] != 1) {
      throw Error(ErrorCode::kLabelCardinality,
                  "task label at row " + std::to_string(i) + " is not 0/1");
    }
  }
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Mean binary cross-entropy on logits; returns dL/dlogit per row.
Vector bce_logit_grad(const Vector& logits, const std::vector<int>& labels,
                      std::span<const std::size_t> rows) {
  const auto n = static_cast<double>(logits.size());
  Vector g(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    g(i) = (sigmoid(logits(i)) - static_cast<double>(labels[rows[static_cast<std::size_t>(i)]])) / n;
  }
  return g;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Vector head_params(const ClassifierHead& head) {
  Vector flat(head.weight.size() + 1);
  flat << head.weight, head.bias;
  return flat;
}

void set_head_params(const Vector& flat, ClassifierHead& head) {
  head.weight = flat.head(flat.size() - 1);
  head.bias = flat(flat.size() - 1);
}

DownstreamResult run_downstream(const EncoderModel& pretrained, const LabeledDataset& task,
                                const DownstreamConfig& cfg, bool train_encoder) {
  cfg.validate();
  check_binary(task);
  const std::size_t n = task.size();
  if (n == 0) throw Error(ErrorCode::kEmptyCorpus, "downstream task has no rows");

  DownstreamResult result{pretrained.without_head(), ClassifierHead::zeros(pretrained.embedding_dim())};
  EncoderModel& encoder = result.encoder;
  ClassifierHead& head = result.head;

  const auto encoder_count = static_cast<Eigen::Index>(encoder.parameter_count());
  const Eigen::Index head_count = head.weight.size() + 1;
  OptimizerState state(cfg.optimizer, train_encoder ? encoder_count + head_count : head_count);

  // Frozen encoders are evaluated once.
  Matrix frozen;
  if (!train_encoder) frozen = forward(encoder, task.features).output;

  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(cfg.schedule, epoch);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);

      if (train_encoder) {
        const ForwardCache cache = forward(encoder, gather_rows(task.features, rows));
        Vector logits = cache.output * head.weight;
        logits.array() += head.bias;
        const Vector g = bce_logit_grad(logits, task.labels, rows);
        const Matrix grad_z = g * head.weight.transpose();
        const Vector enc_grads = flatten_gradients(backward(encoder, cache, grad_z));

        Vector grads(encoder_count + head_count);
        grads << enc_grads, cache.output.transpose() * g, g.sum();
        Vector params(encoder_count + head_count);
        params << flatten_parameters(encoder.layers()), head_params(head);
        optimizer_step(state, params, grads, lr);
        unflatten_parameters(params.head(encoder_count), encoder.mutable_layers());
        set_head_params(params.tail(head_count), head);
      } else {
        const Matrix z = gather_rows(frozen, rows);
        Vector logits = z * head.weight;
        logits.array() += head.bias;
        const Vector g = bce_logit_grad(logits, task.labels, rows);
        Vector grads(head_count);
        grads << z.transpose() * g, g.sum();
        Vector params = head_params(head);
        optimizer_step(state, params, grads, lr);
        set_head_params(params, head);
      }
    }
  }
  return result;
}

}  // namespace

DownstreamResult finetune(const EncoderModel& encoder, const LabeledDataset& task,
                          const DownstreamConfig& cfg) {
  return run_downstream(encoder, task, cfg, true);
}

ClassifierHead linear_probe(const EncoderModel& encoder, const LabeledDataset& task,
                            const DownstreamConfig& cfg) {
  const std::uint64_t before = parameter_hash(encoder.layers());
  DownstreamResult result = run_downstream(encoder, task, cfg, false);
  if (parameter_hash(result.encoder.layers()) != parameter_hash(encoder.without_head().layers()) ||
      parameter_hash(encoder.layers()) != before) {
    throw Error(ErrorCode::kStaleCache, "linear probe modified the frozen encoder");
  }
  return result.head;
}

DownstreamResult train_downstream(const EncoderModel& encoder, const LabeledDataset& task,
                                  const DownstreamConfig& cfg) {
  if (cfg.regime == DownstreamRegime::kFinetune) return finetune(encoder, task, cfg);
  return {encoder.without_head(), linear_probe(encoder, task, cfg)};
}

Vector predict_scores(const EncoderModel& encoder, const ClassifierHead& head,
                      const Matrix& samples) {
  if (static_cast<std::size_t>(head.weight.size()) != encoder.embedding_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "head width does not match the embedding");
  }
  const Matrix z = forward(encoder, samples).output;
  Vector scores = z * head.weight;
  for (Eigen::Index i = 0; i < scores.size(); ++i) scores(i) = sigmoid(scores(i) + head.bias);
  return scores;
}

}  // namespace modan
