#include "bpl/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/linalg.hpp"
#include "bpl/random.hpp"

namespace bpl {

namespace {

constexpr double kUnitBallSlack = 1e-12;

void require_valid(const BasisSet& b, const char* who) {
  if (b.n_bases() < 1 || b.element_dim() < 1) {
    throw std::invalid_argument(std::string(who) + ": basis set must be at least 1x1");
  }
  if (!b.bases.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": bases contain NaN or Inf");
  }
  if (!(b.norm_type > 0.0)) {
    throw std::invalid_argument(std::string(who) + ": norm_type must be positive");
  }
}

// scale(r): coefficient = scale(r) * (x . B_n). Expressed against the
// unclamped row norm r, folding the clamp in exactly:
//   norm:          (x.B')/||B'||_p   = (x.B)/r for every r
//   norm_squared:  (x.B')/||B'||_p^2 = (x.B)/r^2 inside the ball, (x.B)/r outside
void scale_and_derivative(double r, Denominator denom, double epsilon, double& scale,
                          double& dscale) {
  if (r < epsilon) {
    scale = 0.0;
    dscale = 0.0;
    return;
  }
  if (denom == Denominator::kNorm || r > 1.0) {
    scale = 1.0 / r;
    dscale = -1.0 / (r * r);
  } else {
    scale = 1.0 / (r * r);
    dscale = -2.0 / (r * r * r);
  }
}

// d||b||_p / db as an N x F matrix of row-norm gradients. Zero rows for
// guarded (near-zero-norm) bases.
Matrix norm_gradients(const Matrix& bases, const Vector& norms, double p, double epsilon) {
  Matrix g(bases.rows(), bases.cols());
  for (Index n = 0; n < bases.rows(); ++n) {
    const double r = norms[n];
    if (r < epsilon) {
      g.row(n).setZero();
    } else if (p == 2.0) {
      g.row(n) = bases.row(n) / r;
    } else {
      g.row(n) = bases.row(n).array().sign() *
                 (bases.row(n).array().abs() / r).pow(p - 1.0);
    }
  }
  return g;
}

}  // namespace

Vector row_pnorms(const Eigen::Ref<const Matrix>& m, double p) {
  if (p == 2.0) return m.rowwise().norm();
  if (p == 1.0) return m.cwiseAbs().rowwise().sum();
  return m.array().abs().pow(p).rowwise().sum().pow(1.0 / p);
}

BasisSet clamp_bases(const BasisSet& b) {
  require_valid(b, "clamp_bases");
  BasisSet out = b;
  const Vector norms = row_pnorms(b.bases, b.norm_type);
  for (Index n = 0; n < out.n_bases(); ++n) {
    // The slack keeps the map idempotent: a freshly clamped row whose
    // recomputed norm lands an ulp above 1 must not be rescaled again.
    if (norms[n] > 1.0 + kUnitBallSlack) out.bases.row(n) /= norms[n];
  }
  return out;
}

ProjectionOutput bpl_forward(const Batch& x, const BasisSet& b) {
  require_valid(b, "bpl_forward");
  ProjectionOutput out;
  out.bases = b.bases;
  out.norm_type = b.norm_type;
  out.epsilon = b.epsilon;
  out.denominator = b.denominator;
  out.norms = row_pnorms(b.bases, b.norm_type);

  const Index n = b.n_bases();
  out.scale.resize(n);
  out.dscale.resize(n);
  for (Index i = 0; i < n; ++i) {
    scale_and_derivative(out.norms[i], b.denominator, b.epsilon, out.scale[i], out.dscale[i]);
  }

  out.inputs = x;
  out.coefficients.reserve(x.size());
  for (const Matrix& sample : x) {
    if (sample.cols() != b.element_dim()) {
      throw std::invalid_argument("bpl_forward: element dim " + std::to_string(sample.cols()) +
                                  " does not match basis dim " +
                                  std::to_string(b.element_dim()));
    }
    Matrix coeff = sample * b.bases.transpose();  // T x N raw projections
    coeff = coeff.array().rowwise() * out.scale.transpose().array();
    out.coefficients.push_back(std::move(coeff));
  }
  return out;
}

BplGradients bpl_backward(const Batch& grad_y, const ProjectionOutput& cache) {
  if (grad_y.size() != cache.coefficients.size()) {
    throw std::invalid_argument("bpl_backward: batch size mismatch");
  }

  const Index n = cache.bases.rows();
  const Matrix ngrad = norm_gradients(cache.bases, cache.norms, cache.norm_type, cache.epsilon);

  BplGradients out;
  out.grad_x.reserve(grad_y.size());
  out.grad_bases = Matrix::Zero(n, cache.bases.cols());

  // coefficient c = scale(r) * p where p = x . B_n, so
  //   dc/dx = scale * B_n
  //   dc/dB_n = scale * x + dscale * p * d r/dB_n
  Matrix accum_gx = Matrix::Zero(n, cache.bases.cols());  // sum_t g[t,n] x_t per basis
  Vector accum_gp = Vector::Zero(n);                      // sum_t g[t,n] p[t,n]
  for (std::size_t s = 0; s < grad_y.size(); ++s) {
    const Matrix& g = grad_y[s];
    const Matrix& c = cache.coefficients[s];
    const Matrix& x = cache.inputs[s];
    if (g.rows() != c.rows() || g.cols() != c.cols()) {
      throw std::invalid_argument("bpl_backward: grad_y shape does not match coefficients");
    }
    out.grad_x.push_back((g.array().rowwise() * cache.scale.transpose().array()).matrix() *
                         cache.bases);
    accum_gx.noalias() += g.transpose() * x;
    // Recover raw projections from cached coefficients: p = c / scale.
    for (Index i = 0; i < n; ++i) {
      if (cache.scale[i] != 0.0) {
        accum_gp[i] += g.col(i).dot(c.col(i)) / cache.scale[i];
      }
    }
  }

  for (Index i = 0; i < n; ++i) {
    out.grad_bases.row(i) =
        cache.scale[i] * accum_gx.row(i) + cache.dscale[i] * accum_gp[i] * ngrad.row(i);
  }
  return out;
}

BasisSet init_von_mises(const InitSpec& spec, Index n, Index f) {
  if (spec.method != InitMethod::kVonMises) {
    throw std::invalid_argument("init_von_mises: spec.method mismatch");
  }
  if (f < 2) {
    throw std::invalid_argument("init_von_mises: element dim must be >= 2, got " +
                                std::to_string(f));
  }
  if (n < 1) throw std::invalid_argument("init_von_mises: need at least one basis");
  if (!(spec.concentration > 0.0)) {
    throw std::invalid_argument("init_von_mises: concentration must be positive");
  }

  Vector center;
  if (spec.center) {
    if (spec.center->size() != f) {
      throw std::invalid_argument("init_von_mises: center vector has wrong dimension");
    }
    const double norm = spec.center->norm();
    if (norm < 1e-12) throw std::invalid_argument("init_von_mises: center vector is zero");
    center = *spec.center / norm;
  } else {
    center = Vector::Constant(f, 1.0 / std::sqrt(static_cast<double>(f)));
  }

  // Best & Fisher rejection sampler for von Mises(0, kappa), folded to [0, pi]
  // so directions fill one hemisphere around the center.
  const double kappa = spec.concentration;
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double envelope_r = (1.0 + rho * rho) / (2.0 * rho);

  Rng rng(mix_seed(spec.seed, kStreamBasisInit));
  auto sample_angle = [&]() {
    for (;;) {
      const double z = std::cos(M_PI * rng.uniform());
      const double fz = (1.0 + envelope_r * z) / (envelope_r + z);
      const double c = kappa * (envelope_r - fz);
      const double u = rng.uniform();
      if (c * (2.0 - c) - u > 0.0) return std::acos(fz);
      if (u > 0.0 && std::log(c / u) + 1.0 - c >= 0.0) return std::acos(fz);
      if (u == 0.0) return std::acos(fz);
    }
  };

  BasisSet out;
  out.bases.resize(n, f);
  for (Index i = 0; i < n; ++i) {
    const double theta = sample_angle();
    // Uniform direction in the orthogonal complement of the center.
    Vector u(f);
    double norm = 0.0;
    do {
      for (Index j = 0; j < f; ++j) u[j] = rng.normal();
      u -= u.dot(center) * center;
      norm = u.norm();
    } while (norm < 1e-9);
    u /= norm;
    out.bases.row(i) = std::cos(theta) * center + std::sin(theta) * u;
  }
  return out;
}

BasisSet init_multivariate_normal(const InitSpec& spec, Index n, Index f) {
  if (spec.method != InitMethod::kMultivariateNormal) {
    throw std::invalid_argument("init_multivariate_normal: spec.method mismatch");
  }
  if (n < 1 || f < 1) throw std::invalid_argument("init_multivariate_normal: bad shape");
  const double stddev = 1.0 / std::sqrt(static_cast<double>(f));
  Rng rng(mix_seed(spec.seed, kStreamBasisInit));
  BasisSet out;
  out.bases.resize(n, f);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < f; ++j) out.bases(i, j) = rng.normal() * stddev;
  }
  return out;
}

BasisSet init_from_factorization(const InitSpec& spec, Index n, Index f) {
  if (spec.method != InitMethod::kSvd && spec.method != InitMethod::kNmf) {
    throw std::invalid_argument("init_from_factorization: spec.method mismatch");
  }
  if (!spec.data) {
    throw std::invalid_argument("init_from_factorization: spec.data is required");
  }
  const Matrix& data = *spec.data;
  if (data.cols() != f) {
    throw std::invalid_argument("init_from_factorization: data element dim " +
                                std::to_string(data.cols()) + " != " + std::to_string(f));
  }
  if (n > std::min(data.rows(), f)) {
    throw CapacityError("init_from_factorization: cannot extract " + std::to_string(n) +
                        " components from " + std::to_string(data.rows()) + "x" +
                        std::to_string(f) + " data (max " +
                        std::to_string(std::min(data.rows(), f)) + ")");
  }

  BasisSet out;
  if (spec.method == InitMethod::kSvd) {
    out.bases = svd_top_k(data, n).right_vectors.transpose();
  } else {
    NmfResult nmf = nmf_factorize(data, n, spec.nmf_iterations, spec.seed);
    out.bases = nmf.h;
    for (Index i = 0; i < n; ++i) {
      const double norm = out.bases.row(i).norm();
      if (norm < 1e-12) {
        throw NumericalError("init_from_factorization: nmf produced a zero component");
      }
      out.bases.row(i) /= norm;
    }
  }
  return out;
}

BasisSet init_bases(const InitSpec& spec, Index n, Index f) {
  switch (spec.method) {
    case InitMethod::kVonMises:
      return init_von_mises(spec, n, f);
    case InitMethod::kMultivariateNormal:
      return init_multivariate_normal(spec, n, f);
    case InitMethod::kSvd:
    case InitMethod::kNmf:
      return init_from_factorization(spec, n, f);
  }
  throw std::invalid_argument("init_bases: unknown method");
}

}  // namespace bpl
