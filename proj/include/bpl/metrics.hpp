#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bpl/types.hpp"

namespace bpl {

enum class F1Mode { kMicro, kMacro };

// Pooled per-class counts backing every F1 figure.
struct ConfusionCounts {
  Eigen::ArrayXi true_positive;
  Eigen::ArrayXi false_positive;
  Eigen::ArrayXi false_negative;
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassScore> per_class;
  double sparsity_before = 0.0;
  double sparsity_after = 0.0;
  std::vector<double> loss_history;
};

/// 1 where probability >= threshold, else 0. Probabilities and the threshold
/// must lie in [0, 1].
LabelMatrix threshold_predict(const Eigen::Ref<const Matrix>& probabilities,
                              double threshold);

ConfusionCounts confusion_counts(const LabelMatrix& pred, const LabelMatrix& truth);

/// Micro: F1 over globally pooled counts. Macro: mean of per-class F1 with
/// 0/0 defined as 0.
double multilabel_f1(const LabelMatrix& pred, const LabelMatrix& truth, F1Mode mode);

std::vector<ClassScore> per_class_scores(const LabelMatrix& pred, const LabelMatrix& truth);

/// Stacks every set's rows, projects them onto a shared 2-d principal plane
/// and writes a CSV (set_name, basis_index, pc1, pc2) with 17-significant-
/// digit floats. All sets must share the element dimension.
void export_basis_embedding(const std::vector<std::pair<std::string, Matrix>>& sets,
                            const std::filesystem::path& csv_path);

}  // namespace bpl
