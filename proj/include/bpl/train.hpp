#pragma once

#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bpl/config.hpp"
#include "bpl/data.hpp"
#include "bpl/metrics.hpp"
#include "bpl/nn.hpp"
#include "bpl/optim.hpp"

namespace bpl {

struct TrainingHistory {
  std::vector<double> loss;            // one entry per step
  std::vector<long> eval_steps;        // steps at which train metrics were taken
  std::vector<double> train_micro_f1;
  std::vector<double> train_macro_f1;
};

// Everything a resumable run carries.
struct TrainState {
  ExperimentConfig config;
  ClassifierModel model;
  AdamState adam;
  Matrix initial_bases;  // snapshot at init when the front is basis-projection
  TrainingHistory history;
  long step = 0;
};

/// Loads config.dataset_dir, or draws the configured synthetic dataset.
Dataset resolve_dataset(const ExperimentConfig& config);

/// Split per config.test_fraction; a fraction of 0 puts everything in train
/// and leaves test empty.
std::pair<Dataset, Dataset> resolve_split(const ExperimentConfig& config,
                                          const Dataset& full);

/// Element rows of the dataset stacked into one matrix, deterministically
/// strided down to at most max_rows rows (factorization initializer input).
Matrix stack_elements(const Dataset& d, Index max_rows);

/// Model with the configured front and initializer applied.
ClassifierModel build_model(const ExperimentConfig& config, const Dataset& train);

TrainState init_train_state(const ExperimentConfig& config, const Dataset& train);

/// Sample indices for one training step. Stateless: epoch permutations are
/// derived from (seed, epoch), so a resumed run sees the same batches.
std::vector<Index> batch_for_step(std::uint64_t seed, long step, Index n_samples,
                                  Index batch_size);

/// Runs state.step up to config.steps, or to stop_after_step when given (the
/// schedule still spans config.steps, so an interrupted run resumes onto the
/// same trajectory). Progress lines go to `log` when given. Throws
/// NumericalError if the loss leaves the finite range.
void train_loop(TrainState& state, const Dataset& train, std::ostream* log,
                long stop_after_step = -1);

/// Forward-only pass over a dataset: F1 metrics at the config threshold plus
/// sparsity measured before and after the front layer.
MetricsReport evaluate_model(const ClassifierModel& model, const Dataset& data,
                             double threshold, Index batch_size);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

void save_bases(const Eigen::Ref<const Matrix>& bases, const std::filesystem::path& path);
Matrix load_bases(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsReport& metrics);
nlohmann::json train_report_json(const TrainState& state, const MetricsReport& train_metrics,
                                 const MetricsReport* test_metrics);
nlohmann::json eval_report_json(const MetricsReport& metrics, const std::string& dataset);

}  // namespace bpl
