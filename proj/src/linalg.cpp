#include "bpl/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bpl/random.hpp"

namespace bpl {

namespace {

constexpr double kNmfDenomEpsilon = 1e-12;

void require_finite(const Eigen::Ref<const Matrix>& m, const char* who) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": matrix contains NaN or Inf");
  }
}

}  // namespace

SvdResult svd_top_k(const Eigen::Ref<const Matrix>& m, Index k) {
  if (k < 1 || k > std::min(m.rows(), m.cols())) {
    throw std::invalid_argument("svd_top_k: k = " + std::to_string(k) +
                                " out of range [1, " +
                                std::to_string(std::min(m.rows(), m.cols())) + "]");
  }
  require_finite(m, "svd_top_k");

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.singular_values = svd.singularValues().head(k);
  out.left_vectors = svd.matrixU().leftCols(k);
  out.right_vectors = svd.matrixV().leftCols(k);
  return out;
}

NmfResult nmf_factorize(const Eigen::Ref<const Matrix>& m, Index k, Index iterations,
                        std::uint64_t seed) {
  if (k < 1 || k > std::min(m.rows(), m.cols())) {
    throw std::invalid_argument("nmf_factorize: k = " + std::to_string(k) +
                                " out of range [1, " +
                                std::to_string(std::min(m.rows(), m.cols())) + "]");
  }
  require_finite(m, "nmf_factorize");
  if ((m.array() < 0.0).any()) {
    throw std::invalid_argument("nmf_factorize: matrix has negative entries");
  }

  // |N(0,1)| entries scaled so w*h starts near the data's mean magnitude.
  Rng rng(mix_seed(seed, kStreamFactorizationInit));
  const double scale = std::sqrt(std::max(m.mean(), 0.0) / static_cast<double>(k));
  Matrix w(m.rows(), k), h(k, m.cols());
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = std::abs(rng.normal()) * scale;
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) h(i, j) = std::abs(rng.normal()) * scale;

  NmfResult out;
  out.objective_history.reserve(static_cast<std::size_t>(iterations) + 1);
  auto objective = [&]() { return (m - w * h).squaredNorm(); };
  out.objective_history.push_back(objective());

  for (Index it = 0; it < iterations; ++it) {
    h.array() *= (w.transpose() * m).array() /
                 ((w.transpose() * w * h).array() + kNmfDenomEpsilon);
    w.array() *= (m * h.transpose()).array() /
                 ((w * h * h.transpose()).array() + kNmfDenomEpsilon);
    out.objective_history.push_back(objective());
  }

  out.w = std::move(w);
  out.h = std::move(h);
  out.final_objective = out.objective_history.back();
  return out;
}

Matrix pca_project_2d(const Eigen::Ref<const Matrix>& points) {
  if (points.rows() < 2 || points.cols() < 2) {
    throw std::invalid_argument("pca_project_2d: need at least 2 rows and 2 cols, got " +
                                std::to_string(points.rows()) + "x" +
                                std::to_string(points.cols()));
  }
  require_finite(points, "pca_project_2d");

  const Matrix centered = points.rowwise() - points.colwise().mean();
  SvdResult svd = svd_top_k(centered, 2);

  Matrix components = svd.right_vectors;  // cols x 2
  for (Index c = 0; c < 2; ++c) {
    Index argmax = 0;
    components.col(c).cwiseAbs().maxCoeff(&argmax);
    if (components(argmax, c) < 0.0) components.col(c) = -components.col(c);
  }
  return centered * components;
}

}  // namespace bpl
