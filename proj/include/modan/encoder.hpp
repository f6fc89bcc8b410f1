#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace modan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Affine map y = W x + b with W stored out x in.
struct DenseLayer {
  Matrix weight;
  Vector bias;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

enum class HeadKind {
  kNone,
  kProjection,  // extra layers whose output is L2-normalized; contrastive pretraining
  kClassifier,  // one extra layer emitting raw logits; cross-entropy pretraining
};

/// Fully connected ReLU encoder. The backbone maps d_in to the embedding
/// dimension; an optional head sits on top during pretraining only.
class EncoderModel {
 public:
  EncoderModel() = default;
  EncoderModel(std::vector<DenseLayer> layers, std::size_t backbone_depth, HeadKind head);

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  /// `backbone_dims` is {d_in, hidden..., d}; `head_dims` lists the output
  /// width of each head layer (empty when head == kNone).
  static EncoderModel create(const std::vector<std::size_t>& backbone_dims, HeadKind head,
                             const std::vector<std::size_t>& head_dims, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  /// Mutable access invalidates outstanding forward caches.
  std::vector<DenseLayer>& mutable_layers() noexcept {
    ++generation_;
    return layers_;
  }

  std::size_t backbone_depth() const noexcept { return backbone_depth_; }
  HeadKind head() const noexcept { return head_; }
  std::size_t input_dim() const;
  std::size_t embedding_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  std::uint64_t generation() const noexcept { return generation_; }

  /// The backbone alone, as used for downstream tasks.
  EncoderModel without_head() const;

  bool operator==(const EncoderModel& o) const {
    return layers_ == o.layers_ && backbone_depth_ == o.backbone_depth_ && head_ == o.head_;
  }

 private:
  std::vector<DenseLayer> layers_;
  std::size_t backbone_depth_ = 0;
  HeadKind head_ = HeadKind::kNone;
  std::uint64_t generation_ = 0;
};

enum class ForwardTarget {
  kEmbedding,  // backbone only, normalized
  kHead,       // backbone + head; normalized unless the head is a classifier
};

struct ForwardCache {
  const EncoderModel* model = nullptr;
  std::uint64_t generation = 0;
  std::size_t depth = 0;              // number of layers evaluated
  std::vector<Matrix> layer_inputs;   // n x in, per evaluated layer
  std::vector<Matrix> preactivations; // n x out, per evaluated layer
  bool normalized = false;
  Vector norms;                       // pre-normalization row norms (clamped)
  Matrix output;                      // n x out; rows unit norm when normalized
};

struct ParameterGradients {
  std::vector<DenseLayer> layers;  // same shapes as the model; unused layers are zero
  Matrix input;                    // d(loss)/d(input rows)
};

/// Minimum norm used when dividing by ||u|| in the output normalization.
inline constexpr double kNormClamp = 1e-12;

/// Batched forward over rows of `inputs`. Throws ShapeMismatch.
ForwardCache forward(const EncoderModel& model, const Matrix& inputs,
                     ForwardTarget target = ForwardTarget::kEmbedding);

/// Single-sample convenience wrapper; returns the emitted vector.
Vector forward(const EncoderModel& model, const Vector& input,
               ForwardTarget target = ForwardTarget::kEmbedding);

/// Exact reverse pass through ReLUs and the normalization Jacobian
/// (I - z z^T) / ||u||. Throws StaleCache if the model changed since forward.
ParameterGradients backward(const EncoderModel& model, const ForwardCache& cache,
                            const Matrix& grad_output);

Vector flatten_parameters(const std::vector<DenseLayer>& layers);
void unflatten_parameters(const Vector& flat, std::vector<DenseLayer>& layers);
Vector flatten_gradients(const ParameterGradients& grads);

/// FNV-1a over the raw bytes of every parameter, in layer order.
std::uint64_t parameter_hash(const std::vector<DenseLayer>& layers);

}  // namespace modan
