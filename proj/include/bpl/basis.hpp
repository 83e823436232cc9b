#pragma once

#include <cstdint>
#include <optional>

#include "bpl/types.hpp"

namespace bpl {

// Which power of the basis norm divides the raw projection. kNorm is the
// default reading (the norm-type superscript selects the p-norm); kNormSquared
// is kept as a switch for sensitivity experiments.
enum class Denominator { kNorm, kNormSquared };

// Learnable projection bases. `bases` stores the unconstrained parameter B;
// the effective parameter is B'_n = B_n / max(1, ||B_n||_p), so every basis
// the projection sees lives inside the unit p-ball.
struct BasisSet {
  Matrix bases;  // N x F
  double norm_type = 2.0;
  double epsilon = 1e-12;  // rows with ||B'_n||_p below this emit constant 0
  Denominator denominator = Denominator::kNorm;

  Index n_bases() const { return bases.rows(); }
  Index element_dim() const { return bases.cols(); }
};

// Forward result plus everything backward needs. Inputs are copied: the
// cached pair is immutable for the lifetime of the output.
struct ProjectionOutput {
  Batch coefficients;  // per sample T x N

  Batch inputs;        // per sample T x F
  Matrix bases;        // unclamped N x F snapshot
  Vector norms;        // r_n = ||B_n||_p
  Vector scale;        // coefficient = scale_n * (x . B_n); 0 for guarded rows
  Vector dscale;       // d(scale_n)/d(r_n); 0 for guarded rows
  double norm_type = 2.0;
  double epsilon = 1e-12;
  Denominator denominator = Denominator::kNorm;
};

struct BplGradients {
  Batch grad_x;        // per sample T x F
  Matrix grad_bases;   // N x F, w.r.t. the unclamped parameter
};

// How bases are initialized.
enum class InitMethod { kVonMises, kMultivariateNormal, kSvd, kNmf };

struct InitSpec {
  InitMethod method = InitMethod::kVonMises;
  std::uint64_t seed = 0;
  double concentration = M_PI;           // von Mises kappa
  std::optional<Vector> center;          // von Mises center; default (1,..,1)/sqrt(F)
  std::optional<Matrix> data;            // elements x F, required for svd/nmf
  Index nmf_iterations = 200;
};

/// Row-wise p-norms.
Vector row_pnorms(const Eigen::Ref<const Matrix>& m, double p);

/// Rescales every row with ||B_n||_p > 1 onto the unit p-sphere. Rows already
/// inside the ball pass through bit-for-bit.
BasisSet clamp_bases(const BasisSet& b);

/// Projects each element row of each sample onto every basis:
/// coefficient_n = (x . B'_n) / ||B'_n||_p (or the squared-norm variant).
/// Rows with ||B'_n||_p < epsilon emit exactly 0.
ProjectionOutput bpl_forward(const Batch& x, const BasisSet& b);

/// Analytic gradients of bpl_forward w.r.t. inputs and the unclamped bases.
/// The clamp is differentiated as part of the map (identity Jacobian inside
/// the ball, quotient rule outside; the boundary uses the inside branch).
BplGradients bpl_backward(const Batch& grad_y, const ProjectionOutput& cache);

/// Bases sampled at von Mises-distributed angles around a center direction,
/// each a unit vector. Requires f >= 2 and concentration > 0.
BasisSet init_von_mises(const InitSpec& spec, Index n, Index f);

/// Entries i.i.d. Normal(0, 1/f), so rows land near the unit sphere.
BasisSet init_multivariate_normal(const InitSpec& spec, Index n, Index f);

/// Bases from a factorization of spec.data: top-n right singular vectors
/// (svd) or unit-normalized rows of H (nmf). Throws CapacityError when
/// n > min(element count, f).
BasisSet init_from_factorization(const InitSpec& spec, Index n, Index f);

/// Dispatch on spec.method.
BasisSet init_bases(const InitSpec& spec, Index n, Index f);

}  // namespace bpl
