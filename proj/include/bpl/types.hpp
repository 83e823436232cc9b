#pragma once

#include <Eigen/Dense>
#include <vector>

namespace bpl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// A batch of samples. For spectra each entry is T x F (retention time x m/z);
// for channel-first convolution inputs each entry is C x T.
using Batch = std::vector<Matrix>;

// Binary label matrix, one row per sample, one column per class.
using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace bpl
