#include "bpl/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "bpl/errors.hpp"
#include "bpl/linalg.hpp"

namespace bpl {

namespace {

void require_binary(const LabelMatrix& m, const char* who) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0 && m(i, j) != 1) {
        throw std::invalid_argument(std::string(who) + ": entries must be 0 or 1");
      }
    }
  }
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

LabelMatrix threshold_predict(const Eigen::Ref<const Matrix>& probabilities,
                              double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold_predict: threshold must be in [0, 1]");
  }
  if ((probabilities.array() < 0.0).any() || (probabilities.array() > 1.0).any()) {
    throw std::invalid_argument("threshold_predict: probabilities must be in [0, 1]");
  }
  return (probabilities.array() >= threshold).cast<int>();
}

ConfusionCounts confusion_counts(const LabelMatrix& pred, const LabelMatrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw std::invalid_argument("confusion_counts: shape mismatch");
  }
  require_binary(pred, "confusion_counts");
  require_binary(truth, "confusion_counts");

  ConfusionCounts c;
  c.true_positive = Eigen::ArrayXi::Zero(pred.cols());
  c.false_positive = Eigen::ArrayXi::Zero(pred.cols());
  c.false_negative = Eigen::ArrayXi::Zero(pred.cols());
  for (Index j = 0; j < pred.cols(); ++j) {
    for (Index i = 0; i < pred.rows(); ++i) {
      if (pred(i, j) == 1 && truth(i, j) == 1) c.true_positive[j] += 1;
      if (pred(i, j) == 1 && truth(i, j) == 0) c.false_positive[j] += 1;
      if (pred(i, j) == 0 && truth(i, j) == 1) c.false_negative[j] += 1;
    }
  }
  return c;
}

double multilabel_f1(const LabelMatrix& pred, const LabelMatrix& truth, F1Mode mode) {
  const ConfusionCounts c = confusion_counts(pred, truth);
  if (mode == F1Mode::kMicro) {
    const double tp = c.true_positive.sum();
    const double fp = c.false_positive.sum();
    const double fn = c.false_negative.sum();
    return safe_ratio(2.0 * tp, 2.0 * tp + fp + fn);
  }
  double sum = 0.0;
  for (Index j = 0; j < pred.cols(); ++j) {
    const double tp = c.true_positive[j];
    sum += safe_ratio(2.0 * tp, 2.0 * tp + c.false_positive[j] + c.false_negative[j]);
  }
  return sum / static_cast<double>(pred.cols());
}

std::vector<ClassScore> per_class_scores(const LabelMatrix& pred, const LabelMatrix& truth) {
  const ConfusionCounts c = confusion_counts(pred, truth);
  std::vector<ClassScore> scores;
  scores.reserve(static_cast<std::size_t>(pred.cols()));
  for (Index j = 0; j < pred.cols(); ++j) {
    const double tp = c.true_positive[j];
    ClassScore s;
    s.precision = safe_ratio(tp, tp + c.false_positive[j]);
    s.recall = safe_ratio(tp, tp + c.false_negative[j]);
    s.f1 = safe_ratio(2.0 * tp, 2.0 * tp + c.false_positive[j] + c.false_negative[j]);
    scores.push_back(s);
  }
  return scores;
}

void export_basis_embedding(const std::vector<std::pair<std::string, Matrix>>& sets,
                            const std::filesystem::path& csv_path) {
  Index total_rows = 0;
  Index dim = -1;
  for (const auto& [name, m] : sets) {
    if (dim < 0) dim = m.cols();
    if (m.cols() != dim) {
      throw std::invalid_argument("export_basis_embedding: set '" + name +
                                  "' element dim mismatch");
    }
    total_rows += m.rows();
  }
  if (total_rows < 2) {
    throw std::invalid_argument("export_basis_embedding: need at least 2 rows in total");
  }

  Matrix stacked(total_rows, dim);
  Index row = 0;
  for (const auto& [name, m] : sets) {
    stacked.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  const Matrix embedded = pca_project_2d(stacked);

  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("export_basis_embedding: cannot open " + csv_path.string());
  out << "set_name,basis_index,pc1,pc2\n";
  char buf[64];
  row = 0;
  for (const auto& [name, m] : sets) {
    for (Index i = 0; i < m.rows(); ++i, ++row) {
      out << name << ',' << i;
      std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", embedded(row, 0), embedded(row, 1));
      out << buf << '\n';
    }
  }
  if (!out) throw DataError("export_basis_embedding: write failed for " + csv_path.string());
}

}  // namespace bpl
