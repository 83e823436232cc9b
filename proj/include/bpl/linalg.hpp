#pragma once

#include <cstdint>
#include <vector>

#include "bpl/types.hpp"

namespace bpl {

// Top-k singular triplets of a dense matrix.
struct SvdResult {
  Vector singular_values;  // length k, sorted descending, non-negative
  Matrix left_vectors;     // rows x k
  Matrix right_vectors;    // cols x k
};

// Non-negative factorization m ~ w * h under the squared Frobenius objective.
struct NmfResult {
  Matrix w;  // rows x k
  Matrix h;  // k x cols
  double final_objective = 0.0;
  // ||m - w*h||_F^2 after initialization and after each update; length iterations + 1.
  std::vector<double> objective_history;
};

/// Truncated SVD. Requires 1 <= k <= min(rows, cols) and a finite matrix.
SvdResult svd_top_k(const Eigen::Ref<const Matrix>& m, Index k);

/// Multiplicative-update NMF (Lee & Seung). Entries of m must be >= 0.
/// Deterministic for a fixed seed; the objective is non-increasing.
NmfResult nmf_factorize(const Eigen::Ref<const Matrix>& m, Index k, Index iterations,
                        std::uint64_t seed);

/// Projects each row onto the top-2 principal axes of the mean-centered data.
/// Output column variances (1/(rows-1) convention) come out in descending
/// order; component signs are fixed so the largest-magnitude entry of each
/// axis is positive.
Matrix pca_project_2d(const Eigen::Ref<const Matrix>& points);

}  // namespace bpl
