#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bpl/types.hpp"

namespace bpl {

// One spectrum: non-negative T x F intensities plus a binary label vector.
struct SpectrumSample {
  Matrix intensities;            // T x F
  Eigen::VectorXi labels;        // n_classes entries, each 0/1
  std::string sample_id;
};

struct Dataset {
  std::vector<SpectrumSample> samples;
  Index t_dim = 0;
  Index f_dim = 0;
  std::vector<std::string> class_names;

  Index n_samples() const { return static_cast<Index>(samples.size()); }
  Index n_classes() const { return static_cast<Index>(class_names.size()); }
};

// Recipe for a pattern-sparse synthetic dataset: every class owns a set of
// Gaussian peaks in (time, m/z); samples superimpose the peaks of 1-3 drawn
// classes plus half-normal noise, then small values are zeroed until the
// target sparsity is reached. Each element row keeps its largest entry, so
// elements are sparse but never empty.
struct SyntheticSpec {
  Index n_samples = 96;
  Index t_dim = 128;
  Index f_dim = 48;
  Index n_classes = 12;
  double target_sparsity = 0.80;
  Index peaks_per_class = 4;
  double noise_scale = 0.35;
  std::uint64_t seed = 0;
};

struct Peak {
  double t_center = 0.0;
  double f_center = 0.0;
  double sigma_t = 1.0;
  double sigma_f = 1.0;
  double amplitude = 1.0;
};

/// Fraction of entries with |value| < 1e-15.
double sparsity_ratio(const Eigen::Ref<const Matrix>& x);
double sparsity_ratio(const Batch& x);

/// The seeded peak templates each class owns under `spec`. Peaks are written
/// only inside a 3-sigma box around their center; outside is exactly zero.
std::vector<std::vector<Peak>> synthetic_class_peaks(const SyntheticSpec& spec);

/// Deterministic synthetic dataset per `spec`. Throws invalid_argument when
/// the requested sparsity cannot be reached within +-2%.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Seeded shuffle-then-partition split; every sample lands in exactly one
/// part and |test size - fraction * n| < 1.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

/// Directory format: manifest.json plus one binary blob per sample
/// (16-byte header "GCMS" | version u32 | T u32 | F u32, then row-major
/// little-endian f64 intensities). Round-trips are bit-exact.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace bpl
