#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpl/config.hpp"
#include "bpl/metrics.hpp"

namespace bpl {

// One (front, size, initializer) grid cell: either a scored result or the
// typed error that prevented it.
struct CompareCell {
  std::string front;
  std::optional<Index> n_bases;             // fcl/bpl only
  std::optional<std::string> initializer;   // bpl only
  bool ok = false;
  MetricsReport metrics;
  std::optional<double> pct_change_micro_f1;  // vs the plain-CNN baseline
  std::string error_type;     // "capacity" | "config" | "numerical" | "data"
  std::string error_message;
};

struct ComparisonReport {
  ExperimentConfig config;
  std::vector<CompareCell> cells;
  std::optional<double> baseline_micro_f1;
};

/// Trains and evaluates every requested cell on one shared split. Cell
/// failures are recorded in-report; the harness keeps going.
ComparisonReport run_compare(const ExperimentConfig& config, std::ostream* log);

nlohmann::json compare_report_json(const ComparisonReport& report);
void write_compare_csv(const ComparisonReport& report, const std::filesystem::path& path);

}  // namespace bpl
