#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpl/errors.hpp"
#include "bpl/nn.hpp"
#include "oracles.hpp"

using bpl::Batch;
using bpl::Index;
using bpl::LabelMatrix;
using bpl::Matrix;
using bpl::Vector;

namespace {

bpl::ModelConfig tiny_config(bpl::FrontKind front) {
  bpl::ModelConfig cfg;
  cfg.front = front;
  cfg.f_dim = 6;
  cfg.front_out = 5;
  cfg.width = 4;
  cfg.blocks = 2;
  cfg.kernel_size = 3;
  cfg.n_classes = 3;
  return cfg;
}

LabelMatrix random_labels(Index rows, Index cols, std::uint64_t seed) {
  bpl::Rng rng(seed);
  LabelMatrix y(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) y(i, j) = rng.uniform() < 0.5 ? 0 : 1;
  return y;
}

}  // namespace

TEST_CASE("unit vectorization basics") {
  Matrix x(2, 2);
  x << 3.0, 4.0, 0.0, 0.0;
  const Matrix y = bpl::unit_vectorize(x);
  CHECK(y(0, 0) == doctest::Approx(0.6));
  CHECK(y(0, 1) == doctest::Approx(0.8));
  CHECK(y(1, 0) == 0.0);
  CHECK(y(1, 1) == 0.0);
}

TEST_CASE("unit vectorization row norms are 0 or 1") {
  bpl::Rng rng(4);
  Matrix x = oracles::random_matrix(50, 8, 9);
  for (Index i = 0; i < x.rows(); ++i) {
    if (rng.uniform() < 0.3) x.row(i).setZero();
  }
  const Matrix y = bpl::unit_vectorize(x);
  for (Index i = 0; i < y.rows(); ++i) {
    const double norm = y.row(i).norm();
    CHECK((std::abs(norm) < 1e-12 || std::abs(norm - 1.0) < 1e-12));
  }
  // idempotent
  const Matrix yy = bpl::unit_vectorize(y);
  CHECK((yy - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv with an identity kernel is the identity") {
  bpl::Conv1dLayer layer = bpl::make_conv1d(1, 1, 3);
  layer.weight(0, 1) = 1.0;  // middle tap
  const Matrix x = oracles::random_matrix(1, 10, 3);
  CHECK((bpl::conv1d_forward(x, layer) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv matches a hand-computed cross-correlation") {
  bpl::Conv1dLayer layer = bpl::make_conv1d(1, 1, 3);
  layer.weight.setOnes();
  Matrix x(1, 3);
  x << 1.0, 2.0, 3.0;
  const Matrix y = bpl::conv1d_forward(x, layer);
  CHECK(y(0, 0) == doctest::Approx(3.0));
  CHECK(y(0, 1) == doctest::Approx(6.0));
  CHECK(y(0, 2) == doctest::Approx(5.0));
}

TEST_CASE("conv of zero input broadcasts the bias") {
  bpl::Conv1dLayer layer = bpl::make_conv1d(2, 3, 3);
  layer.weight = oracles::random_matrix(3, 6, 5);
  layer.bias << 1.0, -2.0, 0.5;
  const Matrix y = bpl::conv1d_forward(Matrix::Zero(2, 7), layer);
  for (Index t = 0; t < 7; ++t) {
    CHECK(y(0, t) == 1.0);
    CHECK(y(1, t) == -2.0);
    CHECK(y(2, t) == 0.5);
  }
}

TEST_CASE("conv validates channel count and kernel parity") {
  bpl::Conv1dLayer layer = bpl::make_conv1d(2, 2, 3);
  CHECK_THROWS_AS(bpl::conv1d_forward(Matrix::Zero(3, 5), layer), std::invalid_argument);
  CHECK_THROWS_AS(bpl::make_conv1d(1, 1, 4), std::invalid_argument);
}

TEST_CASE("residual block with zero weights is the identity on non-negative input") {
  bpl::ModelConfig cfg = tiny_config(bpl::FrontKind::kIdentity);
  bpl::ClassifierModel model = bpl::make_model(cfg, 0);
  for (auto& block : model.blocks) {
    block.conv1.weight.setZero();
    block.conv2.weight.setZero();
  }
  // With zero stem weights the trail is all zeros; instead check one block in
  // isolation: out = relu(conv2(relu(conv1 h)) + h) = relu(h) = h for h >= 0.
  const Matrix h = oracles::random_matrix(cfg.width, 9, 2).cwiseAbs();
  const Matrix h1 = bpl::conv1d_forward(h, model.blocks[0].conv1).cwiseMax(0.0);
  const Matrix out = (bpl::conv1d_forward(h1, model.blocks[0].conv2) + h).cwiseMax(0.0);
  CHECK((out - h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("default model has seventeen conv layers") {
  bpl::ModelConfig cfg;  // defaults: 8 blocks
  cfg.f_dim = 8;
  cfg.front_out = 8;
  cfg.width = 4;
  const bpl::ClassifierModel model = bpl::make_model(cfg, 1);
  CHECK(bpl::conv_layer_count(model) == 17);
}

TEST_CASE("zero input with zero-initialized biases gives zero logits") {
  const bpl::ClassifierModel model = bpl::make_model(tiny_config(bpl::FrontKind::kIdentity), 7);
  Batch x{Matrix::Zero(8, 6), Matrix::Zero(8, 6)};
  bpl::ModelForwardCache cache;
  const Matrix logits = bpl::model_forward(x, model, cache);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical samples produce identical logit rows") {
  const bpl::ClassifierModel model =
      bpl::make_model(tiny_config(bpl::FrontKind::kBasisProjection), 3);
  const Matrix sample = oracles::random_matrix(8, 6, 11).cwiseAbs();
  Batch x{sample, sample, sample};
  bpl::ModelForwardCache cache;
  const Matrix logits = bpl::model_forward(x, model, cache);
  CHECK((logits.row(0) - logits.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((logits.row(0) - logits.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("logits stay inside a weight-norm bound") {
  for (auto front : {bpl::FrontKind::kIdentity, bpl::FrontKind::kFullyConnected}) {
    const bpl::ClassifierModel model = bpl::make_model(tiny_config(front), 13);
    const Matrix sample = oracles::random_matrix(8, 6, 17);
    Batch x{sample};
    bpl::ModelForwardCache cache;
    const Matrix logits = bpl::model_forward(x, model, cache);
    CHECK(logits.allFinite());

    // propagate an infinity-norm bound through the stack
    auto conv_gain = [](const bpl::Conv1dLayer& c) {
      double worst = 0.0;
      for (Index o = 0; o < c.out_channels; ++o) {
        worst = std::max(worst, c.weight.row(o).cwiseAbs().sum());
      }
      return worst;
    };
    double bound = cache.front_out[0].cwiseAbs().maxCoeff();
    bound = model.stem.bias.cwiseAbs().maxCoeff() + conv_gain(model.stem) * bound;
    for (const auto& block : model.blocks) {
      double path = block.conv1.bias.cwiseAbs().maxCoeff() + conv_gain(block.conv1) * bound;
      path = block.conv2.bias.cwiseAbs().maxCoeff() + conv_gain(block.conv2) * path;
      bound += path;
    }
    double head_gain = 0.0;
    for (Index o = 0; o < model.head_weight.rows(); ++o) {
      head_gain = std::max(head_gain, model.head_weight.row(o).cwiseAbs().sum());
    }
    bound = model.head_bias.cwiseAbs().maxCoeff() + head_gain * bound;
    CHECK(logits.cwiseAbs().maxCoeff() <= bound + 1e-9);
  }
}

TEST_CASE("bce at logit zero and label one is ln 2") {
  const Matrix logits = Matrix::Zero(1, 1);
  LabelMatrix labels(1, 1);
  labels << 1;
  CHECK(bpl::bce_loss(logits, labels).value == doctest::Approx(std::log(2.0)));
}

TEST_CASE("bce is stable at extreme logits") {
  Matrix logits(1, 2);
  logits << 50.0, -50.0;
  LabelMatrix labels(1, 2);
  labels << 1, 0;
  const bpl::LossValue loss = bpl::bce_loss(logits, labels);
  CHECK(loss.value < 1e-20);
  CHECK(std::isfinite(loss.value));
}

TEST_CASE("bce rejects non-binary labels") {
  LabelMatrix labels(1, 1);
  labels << 2;
  CHECK_THROWS_AS(bpl::bce_loss(Matrix::Zero(1, 1), labels), std::invalid_argument);
}

TEST_CASE("bce gradient matches finite differences") {
  Matrix logits = oracles::random_matrix(4, 12, 19, 2.0);
  const LabelMatrix labels = random_labels(4, 12, 3);
  const bpl::LossValue loss = bpl::bce_loss(logits, labels);
  for (Index i = 0; i < logits.rows(); ++i) {
    for (Index j = 0; j < logits.cols(); ++j) {
      const double fd = oracles::central_difference(
          [&]() { return bpl::bce_loss(logits, labels).value; }, &logits(i, j));
      CHECK(loss.grad_logits(i, j) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("model parameter gradients match finite differences") {
  for (auto front :
       {bpl::FrontKind::kIdentity, bpl::FrontKind::kUnitVectorization,
        bpl::FrontKind::kFullyConnected, bpl::FrontKind::kBasisProjection}) {
    bpl::ClassifierModel model = bpl::make_model(tiny_config(front), 29);
    // Nudge every parameter (the biases start at exactly zero, which parks
    // relu preactivations on their kink and poisons central differences).
    bpl::Rng nudge(301);
    for (const bpl::ParamBlock& block : bpl::param_blocks(model)) {
      for (Index k = 0; k < block.size; ++k) {
        block.value[k] += nudge.uniform(-0.05, 0.05);
      }
    }
    Batch x{oracles::random_matrix(8, 6, 31).cwiseAbs(),
            oracles::random_matrix(8, 6, 37).cwiseAbs()};
    const LabelMatrix labels = random_labels(2, 3, 5);

    auto loss_value = [&]() {
      bpl::ModelForwardCache cache;
      const Matrix logits = bpl::model_forward(x, model, cache);
      return bpl::bce_loss(logits, labels).value;
    };

    bpl::ModelForwardCache cache;
    const Matrix logits = bpl::model_forward(x, model, cache);
    const bpl::LossValue loss = bpl::bce_loss(logits, labels);
    bpl::zero_gradients(model);
    bpl::model_backward(loss.grad_logits, model, cache);

    double max_rel = 0.0;
    for (const bpl::ParamBlock& block : bpl::param_blocks(model)) {
      for (Index k = 0; k < block.size; ++k) {
        const double fd = oracles::central_difference(loss_value, block.value + k);
        const double analytic = block.grad[k];
        const double rel = std::abs(analytic - fd) /
                           std::max(1e-6, std::max(std::abs(analytic), std::abs(fd)));
        max_rel = std::max(max_rel, rel);
      }
    }
    INFO("front ", static_cast<int>(front));
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("identity front exposes no front parameters") {
  bpl::ClassifierModel model = bpl::make_model(tiny_config(bpl::FrontKind::kIdentity), 2);
  for (const bpl::ParamBlock& block : bpl::param_blocks(model)) {
    CHECK(block.name.rfind("front.", 0) == std::string::npos);
  }
}

TEST_CASE("doubling the logit gradient doubles every parameter gradient") {
  bpl::ClassifierModel model =
      bpl::make_model(tiny_config(bpl::FrontKind::kBasisProjection), 41);
  Batch x{oracles::random_matrix(8, 6, 43).cwiseAbs()};
  bpl::ModelForwardCache cache;
  const Matrix logits = bpl::model_forward(x, model, cache);
  const Matrix g = oracles::random_matrix(1, 3, 47);

  bpl::zero_gradients(model);
  bpl::model_backward(g, model, cache);
  std::vector<std::vector<double>> first;
  for (const auto& block : bpl::param_blocks(model)) {
    first.emplace_back(block.grad, block.grad + block.size);
  }

  bpl::zero_gradients(model);
  bpl::model_backward(Matrix(2.0 * g), model, cache);
  std::size_t b = 0;
  for (const auto& block : bpl::param_blocks(model)) {
    for (Index k = 0; k < block.size; ++k) {
      CHECK(block.grad[k] == 2.0 * first[b][static_cast<std::size_t>(k)]);
    }
    ++b;
  }
}

TEST_CASE("backward without a forward cache is a state error") {
  bpl::ClassifierModel model = bpl::make_model(tiny_config(bpl::FrontKind::kIdentity), 3);
  bpl::ModelForwardCache cache;
  CHECK_THROWS_AS(bpl::model_backward(Matrix::Zero(1, 3), model, cache), bpl::StateError);
}

TEST_CASE("full-size spectra are accepted") {
  // 3375 retention times x 490 m/z channels, 256 bases, 12 classes
  bpl::ModelConfig cfg;
  cfg.front = bpl::FrontKind::kBasisProjection;
  cfg.f_dim = 490;
  cfg.front_out = 256;
  cfg.width = 16;
  cfg.n_classes = 12;
  const bpl::ClassifierModel model = bpl::make_model(cfg, 1);
  CHECK(bpl::conv_layer_count(model) == 17);

  Batch x{Matrix::Zero(3375, 490)};
  bpl::ModelForwardCache cache;
  const Matrix logits = bpl::model_forward(x, model, cache);
  CHECK(logits.rows() == 1);
  CHECK(logits.cols() == 12);
  CHECK(cache.front_out[0].rows() == 3375);
  CHECK(cache.front_out[0].cols() == 256);
  CHECK(logits.allFinite());
}

TEST_CASE("model rejects mismatched element dims") {
  const bpl::ClassifierModel model = bpl::make_model(tiny_config(bpl::FrontKind::kIdentity), 3);
  Batch x{Matrix::Zero(8, 7)};
  bpl::ModelForwardCache cache;
  CHECK_THROWS_AS(bpl::model_forward(x, model, cache), std::invalid_argument);
}
