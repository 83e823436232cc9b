#include "bpl/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/random.hpp"

namespace bpl {

namespace {

void fill_normal(Matrix& m, Rng& rng, double stddev) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal() * stddev;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

// Gradient through relu given its *output* (mask y > 0; exact zeros pass 0).
Matrix relu_backward(const Matrix& grad, const Matrix& y) {
  return (y.array() > 0.0).select(grad, Matrix::Zero(grad.rows(), grad.cols()));
}

void validate_config(const ModelConfig& c) {
  if (c.kernel_size < 1 || c.kernel_size % 2 == 0) {
    throw std::invalid_argument("model config: kernel_size must be odd and >= 1");
  }
  if (c.f_dim < 1 || c.width < 1 || c.blocks < 1 || c.n_classes < 1) {
    throw std::invalid_argument("model config: dimensions must be >= 1");
  }
  if ((c.front == FrontKind::kFullyConnected || c.front == FrontKind::kBasisProjection) &&
      c.front_out < 1) {
    throw std::invalid_argument("model config: front_out must be >= 1");
  }
}

}  // namespace

Conv1dLayer make_conv1d(Index in_channels, Index out_channels, Index kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("make_conv1d: kernel_size must be odd and >= 1");
  }
  Conv1dLayer layer;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.kernel_size = kernel_size;
  layer.weight = Matrix::Zero(out_channels, in_channels * kernel_size);
  layer.bias = Vector::Zero(out_channels);
  layer.weight_grad = Matrix::Zero(out_channels, in_channels * kernel_size);
  layer.bias_grad = Vector::Zero(out_channels);
  return layer;
}

Matrix conv1d_forward(const Eigen::Ref<const Matrix>& x, const Conv1dLayer& layer) {
  if (x.rows() != layer.in_channels) {
    throw std::invalid_argument("conv1d_forward: input has " + std::to_string(x.rows()) +
                                " channels, layer expects " +
                                std::to_string(layer.in_channels));
  }
  const Index t = x.cols();
  if (t < 1) throw std::invalid_argument("conv1d_forward: empty signal");
  const Index pad = (layer.kernel_size - 1) / 2;

  Matrix y = layer.bias.replicate(1, t);
  for (Index j = 0; j < layer.kernel_size; ++j) {
    const Index d = j - pad;
    const Index t0 = std::max<Index>(0, -d);
    const Index len = t - std::abs(d);
    if (len <= 0) continue;
    y.middleCols(t0, len).noalias() +=
        layer.weight.middleCols(j * layer.in_channels, layer.in_channels) *
        x.middleCols(t0 + d, len);
  }
  return y;
}

Matrix conv1d_backward(const Eigen::Ref<const Matrix>& grad_out,
                       const Eigen::Ref<const Matrix>& x, Conv1dLayer& layer) {
  if (grad_out.rows() != layer.out_channels || grad_out.cols() != x.cols()) {
    throw std::invalid_argument("conv1d_backward: gradient shape mismatch");
  }
  const Index t = x.cols();
  const Index pad = (layer.kernel_size - 1) / 2;

  layer.bias_grad += grad_out.rowwise().sum();
  Matrix grad_x = Matrix::Zero(x.rows(), t);
  for (Index j = 0; j < layer.kernel_size; ++j) {
    const Index d = j - pad;
    const Index t0 = std::max<Index>(0, -d);
    const Index len = t - std::abs(d);
    if (len <= 0) continue;
    layer.weight_grad.middleCols(j * layer.in_channels, layer.in_channels).noalias() +=
        grad_out.middleCols(t0, len) * x.middleCols(t0 + d, len).transpose();
    grad_x.middleCols(t0 + d, len).noalias() +=
        layer.weight.middleCols(j * layer.in_channels, layer.in_channels).transpose() *
        grad_out.middleCols(t0, len);
  }
  return grad_x;
}

ClassifierModel make_model(const ModelConfig& config, std::uint64_t seed) {
  validate_config(config);
  Rng rng(mix_seed(seed, kStreamModelInit));

  ClassifierModel model;
  model.config = config;

  const Index cin = config.conv_in_channels();
  model.stem = make_conv1d(cin, config.width, config.kernel_size);
  fill_normal(model.stem.weight, rng,
              std::sqrt(2.0 / static_cast<double>(cin * config.kernel_size)));

  const double conv_std =
      std::sqrt(2.0 / static_cast<double>(config.width * config.kernel_size));
  model.blocks.reserve(config.blocks);
  for (Index b = 0; b < config.blocks; ++b) {
    ResidualBlock block;
    block.conv1 = make_conv1d(config.width, config.width, config.kernel_size);
    block.conv2 = make_conv1d(config.width, config.width, config.kernel_size);
    fill_normal(block.conv1.weight, rng, conv_std);
    fill_normal(block.conv2.weight, rng, conv_std);
    model.blocks.push_back(std::move(block));
  }

  model.head_weight.resize(config.n_classes, config.width);
  fill_normal(model.head_weight, rng, std::sqrt(1.0 / static_cast<double>(config.width)));
  model.head_bias = Vector::Zero(config.n_classes);
  model.head_weight_grad = Matrix::Zero(config.n_classes, config.width);
  model.head_bias_grad = Vector::Zero(config.n_classes);

  if (config.front == FrontKind::kFullyConnected) {
    model.fcl_weight.resize(config.front_out, config.f_dim);
    fill_normal(model.fcl_weight, rng, std::sqrt(1.0 / static_cast<double>(config.f_dim)));
    model.fcl_bias = Vector::Zero(config.front_out);
    model.fcl_weight_grad = Matrix::Zero(config.front_out, config.f_dim);
    model.fcl_bias_grad = Vector::Zero(config.front_out);
  } else if (config.front == FrontKind::kBasisProjection) {
    InitSpec spec;
    spec.method = InitMethod::kMultivariateNormal;
    spec.seed = seed;
    BasisSet bases = init_multivariate_normal(spec, config.front_out, config.f_dim);
    set_front_bases(model, bases);
  }
  return model;
}

void set_front_bases(ClassifierModel& model, const BasisSet& bases) {
  if (model.config.front != FrontKind::kBasisProjection) {
    throw std::invalid_argument("set_front_bases: model has no basis-projection front");
  }
  if (bases.n_bases() != model.config.front_out ||
      bases.element_dim() != model.config.f_dim) {
    throw std::invalid_argument("set_front_bases: basis shape mismatch");
  }
  model.basis = bases;
  model.basis.norm_type = model.config.norm_type;
  model.basis.epsilon = model.config.bpl_epsilon;
  model.basis.denominator = model.config.denominator;
  model.basis_grad = Matrix::Zero(bases.n_bases(), bases.element_dim());
}

Index conv_layer_count(const ClassifierModel& model) {
  return 1 + 2 * static_cast<Index>(model.blocks.size());
}

Matrix unit_vectorize(const Eigen::Ref<const Matrix>& x) {
  Matrix out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Batch unit_vectorize(const Batch& x) {
  Batch out;
  out.reserve(x.size());
  for (const Matrix& sample : x) out.push_back(unit_vectorize(sample));
  return out;
}

Matrix model_forward(const Batch& x, const ClassifierModel& model, ModelForwardCache& cache) {
  const ModelConfig& cfg = model.config;
  const Index batch = static_cast<Index>(x.size());
  if (batch == 0) throw std::invalid_argument("model_forward: empty batch");
  for (const Matrix& sample : x) {
    if (sample.cols() != cfg.f_dim) {
      throw std::invalid_argument("model_forward: sample element dim " +
                                  std::to_string(sample.cols()) + " != config f_dim " +
                                  std::to_string(cfg.f_dim));
    }
  }

  cache = ModelForwardCache{};
  cache.input = x;

  switch (cfg.front) {
    case FrontKind::kIdentity:
      cache.front_out = x;
      break;
    case FrontKind::kUnitVectorization:
      cache.front_out = unit_vectorize(x);
      break;
    case FrontKind::kFullyConnected:
      cache.front_out.reserve(x.size());
      for (const Matrix& sample : x) {
        cache.front_out.push_back((sample * model.fcl_weight.transpose()).rowwise() +
                                  model.fcl_bias.transpose());
      }
      break;
    case FrontKind::kBasisProjection:
      cache.projection = bpl_forward(x, model.basis);
      cache.front_out = cache.projection.coefficients;
      break;
  }

  cache.acts.resize(batch);
  cache.hidden.resize(batch);
  cache.pooled.resize(batch, cfg.width);
  for (Index s = 0; s < batch; ++s) {
    // channels-first: rows = element features, cols = time
    Matrix h = relu(conv1d_forward(cache.front_out[s].transpose(), model.stem));
    cache.acts[s].reserve(model.blocks.size() + 1);
    cache.hidden[s].reserve(model.blocks.size());
    cache.acts[s].push_back(std::move(h));
    for (const ResidualBlock& block : model.blocks) {
      const Matrix& in = cache.acts[s].back();
      Matrix h1 = relu(conv1d_forward(in, block.conv1));
      Matrix out = relu(conv1d_forward(h1, block.conv2) + in);
      cache.hidden[s].push_back(std::move(h1));
      cache.acts[s].push_back(std::move(out));
    }
    cache.pooled.row(s) = cache.acts[s].back().rowwise().mean();
  }

  cache.logits = cache.pooled * model.head_weight.transpose();
  cache.logits.rowwise() += model.head_bias.transpose();
  cache.valid = true;
  return cache.logits;
}

void model_backward(const Matrix& grad_logits, ClassifierModel& model,
                    ModelForwardCache& cache) {
  if (!cache.valid) {
    throw StateError("model_backward: no cached forward pass");
  }
  const ModelConfig& cfg = model.config;
  const Index batch = static_cast<Index>(cache.input.size());
  if (grad_logits.rows() != batch || grad_logits.cols() != cfg.n_classes) {
    throw std::invalid_argument("model_backward: grad_logits shape mismatch");
  }

  model.head_weight_grad.noalias() += grad_logits.transpose() * cache.pooled;
  model.head_bias_grad += grad_logits.colwise().sum().transpose();
  const Matrix grad_pooled = grad_logits * model.head_weight;  // batch x width

  Batch grad_front(batch);  // d loss / d front output, per sample T x N
  for (Index s = 0; s < batch; ++s) {
    const Index t = cache.input[static_cast<std::size_t>(s)].rows();
    // average pool spreads the gradient evenly over time
    Matrix g = (grad_pooled.row(s).transpose() / static_cast<double>(t)).replicate(1, t);
    for (Index b = static_cast<Index>(model.blocks.size()) - 1; b >= 0; --b) {
      ResidualBlock& block = model.blocks[static_cast<std::size_t>(b)];
      const Matrix& in = cache.acts[s][static_cast<std::size_t>(b)];
      const Matrix& h1 = cache.hidden[s][static_cast<std::size_t>(b)];
      const Matrix& out = cache.acts[s][static_cast<std::size_t>(b) + 1];
      const Matrix g_sum = relu_backward(g, out);
      const Matrix g_h1 = relu_backward(conv1d_backward(g_sum, h1, block.conv2), h1);
      g = conv1d_backward(g_h1, in, block.conv1) + g_sum;
    }
    const Matrix g_stem = relu_backward(g, cache.acts[s][0]);
    grad_front[static_cast<std::size_t>(s)] =
        conv1d_backward(g_stem, cache.front_out[static_cast<std::size_t>(s)].transpose(),
                        model.stem)
            .transpose();
  }

  switch (cfg.front) {
    case FrontKind::kIdentity:
    case FrontKind::kUnitVectorization:
      break;  // no parameters in front of the stem
    case FrontKind::kFullyConnected:
      for (Index s = 0; s < batch; ++s) {
        const Matrix& g = grad_front[static_cast<std::size_t>(s)];
        model.fcl_weight_grad.noalias() +=
            g.transpose() * cache.input[static_cast<std::size_t>(s)];
        model.fcl_bias_grad += g.colwise().sum().transpose();
      }
      break;
    case FrontKind::kBasisProjection: {
      BplGradients grads = bpl_backward(grad_front, cache.projection);
      model.basis_grad += grads.grad_bases;
      break;
    }
  }
}

void zero_gradients(ClassifierModel& model) {
  auto zero_conv = [](Conv1dLayer& layer) {
    layer.weight_grad.setZero();
    layer.bias_grad.setZero();
  };
  if (model.config.front == FrontKind::kFullyConnected) {
    model.fcl_weight_grad.setZero();
    model.fcl_bias_grad.setZero();
  } else if (model.config.front == FrontKind::kBasisProjection) {
    model.basis_grad.setZero();
  }
  zero_conv(model.stem);
  for (ResidualBlock& block : model.blocks) {
    zero_conv(block.conv1);
    zero_conv(block.conv2);
  }
  model.head_weight_grad.setZero();
  model.head_bias_grad.setZero();
}

std::vector<ParamBlock> param_blocks(ClassifierModel& model) {
  std::vector<ParamBlock> blocks;
  auto add = [&](const std::string& name, Matrix& value, Matrix& grad) {
    blocks.push_back({name, value.data(), grad.data(), value.size()});
  };
  auto add_vec = [&](const std::string& name, Vector& value, Vector& grad) {
    blocks.push_back({name, value.data(), grad.data(), value.size()});
  };
  auto add_conv = [&](const std::string& prefix, Conv1dLayer& layer) {
    add(prefix + ".weight", layer.weight, layer.weight_grad);
    add_vec(prefix + ".bias", layer.bias, layer.bias_grad);
  };

  if (model.config.front == FrontKind::kFullyConnected) {
    add("front.fcl.weight", model.fcl_weight, model.fcl_weight_grad);
    add_vec("front.fcl.bias", model.fcl_bias, model.fcl_bias_grad);
  } else if (model.config.front == FrontKind::kBasisProjection) {
    add("front.bpl.bases", model.basis.bases, model.basis_grad);
  }
  add_conv("stem", model.stem);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    add_conv("block" + std::to_string(b) + ".conv1", model.blocks[b].conv1);
    add_conv("block" + std::to_string(b) + ".conv2", model.blocks[b].conv2);
  }
  add("head.weight", model.head_weight, model.head_weight_grad);
  add_vec("head.bias", model.head_bias, model.head_bias_grad);
  return blocks;
}

LossValue bce_loss(const Eigen::Ref<const Matrix>& logits, const LabelMatrix& labels) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols()) {
    throw std::invalid_argument("bce_loss: logits/labels shape mismatch");
  }
  for (Index i = 0; i < labels.rows(); ++i) {
    for (Index j = 0; j < labels.cols(); ++j) {
      if (labels(i, j) != 0 && labels(i, j) != 1) {
        throw std::invalid_argument("bce_loss: labels must be 0 or 1");
      }
    }
  }

  const double count = static_cast<double>(logits.size());
  LossValue loss;
  loss.grad_logits.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    for (Index j = 0; j < logits.cols(); ++j) {
      const double z = logits(i, j);
      const double y = static_cast<double>(labels(i, j));
      // max(z,0) - z*y + log(1 + exp(-|z|))
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
      loss.grad_logits(i, j) = (sig - y) / count;
    }
  }
  loss.value = total / count;
  return loss;
}

Matrix sigmoid(const Eigen::Ref<const Matrix>& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    for (Index j = 0; j < logits.cols(); ++j) {
      const double z = logits(i, j);
      out(i, j) = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                           : std::exp(z) / (1.0 + std::exp(z));
    }
  }
  return out;
}

}  // namespace bpl
