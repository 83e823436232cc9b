#pragma once

#include <cstdint>
#include <vector>

#include "bpl/basis.hpp"
#include "bpl/optim.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Same-padding 1-d convolution over the time axis. Weight tap j lives in
// columns [j*in_channels, (j+1)*in_channels) of `weight`; gradients are
// accumulated alongside the parameters.
struct Conv1dLayer {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel_size = 0;
  Matrix weight;       // out x (in * kernel)
  Vector bias;         // out
  Matrix weight_grad;
  Vector bias_grad;
};

Conv1dLayer make_conv1d(Index in_channels, Index out_channels, Index kernel_size);

/// Cross-correlation with zero padding of (kernel_size-1)/2 per side, plus
/// bias. Input and output are channels x T.
Matrix conv1d_forward(const Eigen::Ref<const Matrix>& x, const Conv1dLayer& layer);

/// Accumulates weight/bias gradients for one sample and returns the gradient
/// w.r.t. the layer input.
Matrix conv1d_backward(const Eigen::Ref<const Matrix>& grad_out,
                       const Eigen::Ref<const Matrix>& x, Conv1dLayer& layer);

// out = relu(conv2(relu(conv1(h))) + h); channel counts are all equal.
struct ResidualBlock {
  Conv1dLayer conv1;
  Conv1dLayer conv2;
};

enum class FrontKind { kIdentity, kUnitVectorization, kFullyConnected, kBasisProjection };

struct ModelConfig {
  FrontKind front = FrontKind::kBasisProjection;
  Index f_dim = 48;       // element dimension of the raw input
  Index front_out = 48;   // N for fully-connected / basis-projection fronts
  Index width = 32;       // conv channels
  Index blocks = 8;       // residual blocks; conv layer count = 1 + 2*blocks
  Index kernel_size = 3;  // odd
  Index n_classes = 6;
  // basis-projection front settings
  double norm_type = 2.0;
  double bpl_epsilon = 1e-12;
  Denominator denominator = Denominator::kNorm;

  // Channels entering the stem convolution.
  Index conv_in_channels() const {
    return (front == FrontKind::kFullyConnected || front == FrontKind::kBasisProjection)
               ? front_out
               : f_dim;
  }
};

// Front layer -> stem conv -> residual blocks -> global average pool -> head.
struct ClassifierModel {
  ModelConfig config;

  Matrix fcl_weight;  // front_out x f_dim (fully-connected front only)
  Vector fcl_bias;
  Matrix fcl_weight_grad;
  Vector fcl_bias_grad;

  BasisSet basis;      // basis-projection front only
  Matrix basis_grad;

  Conv1dLayer stem;
  std::vector<ResidualBlock> blocks;

  Matrix head_weight;  // n_classes x width
  Vector head_bias;
  Matrix head_weight_grad;
  Vector head_bias_grad;
};

/// Builds a model with He-initialized conv weights, Normal(0, 1/fan_in)
/// dense weights and zero biases. A basis-projection front starts with
/// multivariate-normal bases; replace via set_front_bases for other schemes.
ClassifierModel make_model(const ModelConfig& config, std::uint64_t seed);

void set_front_bases(ClassifierModel& model, const BasisSet& bases);

/// Total 1-d convolutional layers in the stack (stem + block convs).
Index conv_layer_count(const ClassifierModel& model);

// Activations recorded by model_forward for the matching backward pass.
struct ModelForwardCache {
  Batch input;                      // per sample T x F
  ProjectionOutput projection;      // basis-projection front only
  Batch front_out;                  // per sample T x N (copy of input when identity)
  // conv trail, per sample: acts[0] = stem activation, acts[k] = block k output
  std::vector<std::vector<Matrix>> acts;
  std::vector<std::vector<Matrix>> hidden;  // per sample, per block: relu(conv1(h))
  Matrix pooled;                    // batch x width
  Matrix logits;                    // batch x n_classes
  bool valid = false;
};

/// Per-element scaling of each row to unit 2-norm; all-zero rows stay zero.
Matrix unit_vectorize(const Eigen::Ref<const Matrix>& x);
Batch unit_vectorize(const Batch& x);

/// Forward pass over a batch of T x F samples; returns batch x n_classes logits.
Matrix model_forward(const Batch& x, const ClassifierModel& model, ModelForwardCache& cache);

/// Reverse pass from logit gradients; accumulates into the model's *_grad
/// fields. Requires the cache produced by model_forward.
void model_backward(const Matrix& grad_logits, ClassifierModel& model,
                    ModelForwardCache& cache);

void zero_gradients(ClassifierModel& model);

/// Named views over every trainable parameter block and its gradient, in a
/// stable order (used by the optimizer and the checkpoint writer).
std::vector<ParamBlock> param_blocks(ClassifierModel& model);

// Mean sigmoid binary cross-entropy over batch x classes, in the
// overflow-free log-sum-exp form. Gradient w.r.t. logits is cached.
struct LossValue {
  double value = 0.0;
  Matrix grad_logits;  // d(mean loss)/d(logit)
};

LossValue bce_loss(const Eigen::Ref<const Matrix>& logits, const LabelMatrix& labels);

/// Numerically stable elementwise logistic function.
Matrix sigmoid(const Eigen::Ref<const Matrix>& logits);

}  // namespace bpl
