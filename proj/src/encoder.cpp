#include "modan/encoder.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "modan/error.hpp"

namespace modan {

EncoderModel::EncoderModel(std::vector<DenseLayer> layers, std::size_t backbone_depth,
                           HeadKind head)
    : layers_(std::move(layers)), backbone_depth_(backbone_depth), head_(head) {
  if (layers_.empty() || backbone_depth_ == 0 || backbone_depth_ > layers_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "encoder needs at least one backbone layer");
  }
  if ((head_ == HeadKind::kNone) != (backbone_depth_ == layers_.size())) {
    throw Error(ErrorCode::kShapeMismatch, "head kind disagrees with layer count");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0 || l.bias.size() != l.weight.rows()) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " malformed");
    }
    if (i > 0 && l.in_dim() != layers_[i - 1].out_dim()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "layer " + std::to_string(i) + " input does not match previous output");
    }
  }
}

EncoderModel EncoderModel::create(const std::vector<std::size_t>& backbone_dims, HeadKind head,
                                  const std::vector<std::size_t>& head_dims,
                                  std::uint64_t seed) {
  if (backbone_dims.size() < 2) {
    throw Error(ErrorCode::kBadConfig, "backbone needs input and output dimensions");
  }
  if ((head == HeadKind::kNone) != head_dims.empty()) {
    throw Error(ErrorCode::kBadConfig, "head dims must be given iff a head is requested");
  }
  std::vector<std::size_t> dims = backbone_dims;
  dims.insert(dims.end(), head_dims.begin(), head_dims.end());
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorCode::kBadConfig, "layer widths must be positive");
  }

  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Matrix(out, in), Vector(out)};
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    }
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = u(rng);
    layers.push_back(std::move(layer));
  }
  return EncoderModel(std::move(layers), backbone_dims.size() - 1, head);
}

std::size_t EncoderModel::input_dim() const {
  return static_cast<std::size_t>(layers_.front().in_dim());
}

std::size_t EncoderModel::embedding_dim() const {
  return static_cast<std::size_t>(layers_[backbone_depth_ - 1].out_dim());
}

std::size_t EncoderModel::output_dim() const {
  return static_cast<std::size_t>(layers_.back().out_dim());
}

std::size_t EncoderModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

EncoderModel EncoderModel::without_head() const {
  std::vector<DenseLayer> backbone(layers_.begin(),
                                   layers_.begin() + static_cast<std::ptrdiff_t>(backbone_depth_));
  return EncoderModel(std::move(backbone), backbone_depth_, HeadKind::kNone);
}

ForwardCache forward(const EncoderModel& model, const Matrix& inputs, ForwardTarget target) {
  if (static_cast<std::size_t>(inputs.cols()) != model.input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "input dimension " + std::to_string(inputs.cols()) +
                                               " != " + std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  cache.model = &model;
  cache.generation = model.generation();
  cache.depth = target == ForwardTarget::kEmbedding ? model.backbone_depth()
                                                    : model.layers().size();
  cache.normalized =
      target == ForwardTarget::kEmbedding || model.head() != HeadKind::kClassifier;

  Matrix activation = inputs;
  for (std::size_t i = 0; i < cache.depth; ++i) {
    const auto& layer = model.layers()[i];
    Matrix pre = activation * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    cache.layer_inputs.push_back(std::move(activation));
    activation = (i + 1 < cache.depth) ? Matrix(pre.cwiseMax(0.0)) : pre;
    cache.preactivations.push_back(std::move(pre));
  }

  if (cache.normalized) {
    cache.norms = activation.rowwise().norm().cwiseMax(kNormClamp);
    cache.output = cache.norms.cwiseInverse().asDiagonal() * activation;
  } else {
    cache.output = std::move(activation);
  }
  return cache;
}

Vector forward(const EncoderModel& model, const Vector& input, ForwardTarget target) {
  const ForwardCache cache = forward(model, Matrix(input.transpose()), target);
  return cache.output.row(0).transpose();
}

ParameterGradients backward(const EncoderModel& model, const ForwardCache& cache,
                            const Matrix& grad_output) {
  if (cache.model != &model || cache.generation != model.generation()) {
    throw Error(ErrorCode::kStaleCache, "forward cache does not belong to the current model");
  }
  if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient shape does not match forward output");
  }

  ParameterGradients grads;
  for (const auto& l : model.layers()) {
    grads.layers.push_back(
        {Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }

  Matrix upstream;
  if (cache.normalized) {
    // dL/du = (g - z (z . g)) / ||u|| row by row.
    const Vector radial = (cache.output.cwiseProduct(grad_output)).rowwise().sum();
    upstream = grad_output - radial.asDiagonal() * cache.output;
    upstream = cache.norms.cwiseInverse().asDiagonal() * upstream;
  } else {
    upstream = grad_output;
  }

  for (std::size_t i = cache.depth; i-- > 0;) {
    const auto& layer = model.layers()[i];
    if (i + 1 < cache.depth) {
      upstream = upstream.cwiseProduct(
          (cache.preactivations[i].array() > 0.0).cast<double>().matrix());
    }
    grads.layers[i].weight = upstream.transpose() * cache.layer_inputs[i];
    grads.layers[i].bias = upstream.colwise().sum().transpose();
    upstream = upstream * layer.weight;
  }
  grads.input = std::move(upstream);
  return grads;
}

Vector flatten_parameters(const std::vector<DenseLayer>& layers) {
  std::size_t total = 0;
  for (const auto& l : layers) total += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  Vector flat(static_cast<Eigen::Index>(total));
  Eigen::Index offset = 0;
  for (const auto& l : layers) {
    flat.segment(offset, l.weight.size()) = l.weight.reshaped();
    offset += l.weight.size();
    flat.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return flat;
}

void unflatten_parameters(const Vector& flat, std::vector<DenseLayer>& layers) {
  Eigen::Index offset = 0;
  for (auto& l : layers) {
    if (offset + l.weight.size() + l.bias.size() > flat.size()) {
      throw Error(ErrorCode::kShapeMismatch, "flat parameter vector too short");
    }
    l.weight.reshaped() = flat.segment(offset, l.weight.size());
    offset += l.weight.size();
    l.bias = flat.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
  if (offset != flat.size()) {
    throw Error(ErrorCode::kShapeMismatch, "flat parameter vector too long");
  }
}

Vector flatten_gradients(const ParameterGradients& grads) { return flatten_parameters(grads.layers); }

std::uint64_t parameter_hash(const std::vector<DenseLayer>& layers) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : layers) {
    mix(l.weight.data(), l.weight.size());
    mix(l.bias.data(), l.bias.size());
  }
  return h;
}

}  // namespace modan
