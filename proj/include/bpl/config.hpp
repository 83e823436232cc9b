#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpl/basis.hpp"
#include "bpl/data.hpp"
#include "bpl/nn.hpp"

namespace bpl {

// Grid axes for the comparison harness.
struct CompareSpec {
  std::vector<std::string> fronts = {"none", "unit_vec", "fcl", "bpl"};
  std::vector<Index> sizes = {24, 48, 72};
  std::vector<std::string> initializers = {"svd", "nmf", "multivariate_normal",
                                           "von_mises"};
};

// One experiment, fully resolved. Serializes to/from JSON; parsing is strict
// (unknown keys are config errors) and the resolved form is echoed into every
// output directory.
struct ExperimentConfig {
  // data: a directory produced by gen-data, or an in-memory synthetic draw
  std::string dataset_dir;  // empty => synthetic
  SyntheticSpec synthetic;
  double test_fraction = 0.2;  // 0 => train on the full dataset

  // model
  std::string front = "bpl";  // none | unit_vec | fcl | bpl
  Index n_bases = 48;
  std::string initializer = "von_mises";  // von_mises | multivariate_normal | svd | nmf
  double concentration = M_PI;
  Index width = 32;
  Index blocks = 8;
  Index kernel_size = 3;
  double norm_type = 2.0;
  std::string denominator = "norm";  // norm | norm_squared
  Index max_init_elements = 2048;    // element rows fed to svd/nmf initializers

  // training
  long steps = 2000;
  Index batch_size = 16;
  double lr_max = 1e-3;
  double lr_min = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  long eval_interval = 100;
  double threshold = 0.5;

  std::uint64_t seed = 0;
  CompareSpec compare;
};

FrontKind front_kind_from_string(const std::string& name);
std::string front_kind_to_string(FrontKind kind);
InitMethod init_method_from_string(const std::string& name);
Denominator denominator_from_string(const std::string& name);

/// Strict parse; throws std::invalid_argument on unknown keys, wrong types or
/// out-of-range values. Absent keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Cross-field checks that need no dataset: front/initializer names, grid
/// sanity, svd/nmf capacity against the synthetic element dimension.
void validate_config(const ExperimentConfig& config);

}  // namespace bpl
