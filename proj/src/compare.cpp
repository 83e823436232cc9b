#include "bpl/compare.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "bpl/errors.hpp"
#include "bpl/train.hpp"

namespace bpl {

namespace {

using nlohmann::json;

CompareCell run_cell(const ExperimentConfig& base, const Dataset& train,
                     const Dataset& eval_set, const CompareCell& shape, std::ostream* log) {
  CompareCell cell = shape;
  ExperimentConfig config = base;
  config.front = cell.front;
  if (cell.n_bases) config.n_bases = *cell.n_bases;
  if (cell.initializer) config.initializer = *cell.initializer;

  if (log) {
    *log << "[compare] front=" << cell.front
         << (cell.n_bases ? " n=" + std::to_string(*cell.n_bases) : "")
         << (cell.initializer ? " init=" + *cell.initializer : "") << "\n";
  }
  try {
    TrainState state = init_train_state(config, train);
    train_loop(state, train, log);
    cell.metrics =
        evaluate_model(state.model, eval_set, config.threshold, config.batch_size);
    cell.ok = true;
  } catch (const CapacityError& e) {
    cell.error_type = "capacity";
    cell.error_message = e.what();
  } catch (const std::invalid_argument& e) {
    cell.error_type = "config";
    cell.error_message = e.what();
  } catch (const NumericalError& e) {
    cell.error_type = "numerical";
    cell.error_message = e.what();
  } catch (const DataError& e) {
    cell.error_type = "data";
    cell.error_message = e.what();
  }
  if (log && !cell.ok) {
    *log << "[compare]   -> " << cell.error_type << ": " << cell.error_message << "\n";
  }
  return cell;
}

}  // namespace

ComparisonReport run_compare(const ExperimentConfig& config, std::ostream* log) {
  const Dataset full = resolve_dataset(config);
  const auto [train, test] = resolve_split(config, full);
  const Dataset& eval_set = test.n_samples() > 0 ? test : train;

  std::vector<CompareCell> shapes;
  for (const std::string& front : config.compare.fronts) {
    if (front == "none" || front == "unit_vec") {
      CompareCell c;
      c.front = front;
      shapes.push_back(c);
    } else if (front == "fcl") {
      for (const Index n : config.compare.sizes) {
        CompareCell c;
        c.front = front;
        c.n_bases = n;
        shapes.push_back(c);
      }
    } else {  // bpl
      for (const std::string& init : config.compare.initializers) {
        for (const Index n : config.compare.sizes) {
          CompareCell c;
          c.front = front;
          c.n_bases = n;
          c.initializer = init;
          shapes.push_back(c);
        }
      }
    }
  }

  ComparisonReport report;
  report.config = config;
  for (const CompareCell& shape : shapes) {
    report.cells.push_back(run_cell(config, train, eval_set, shape, log));
  }

  for (const CompareCell& cell : report.cells) {
    if (cell.front == "none" && cell.ok) {
      report.baseline_micro_f1 = cell.metrics.micro_f1;
      break;
    }
  }
  if (report.baseline_micro_f1 && *report.baseline_micro_f1 > 0.0) {
    for (CompareCell& cell : report.cells) {
      if (cell.ok) {
        cell.pct_change_micro_f1 = 100.0 *
                                   (cell.metrics.micro_f1 - *report.baseline_micro_f1) /
                                   *report.baseline_micro_f1;
      }
    }
  }
  return report;
}

json compare_report_json(const ComparisonReport& report) {
  json cells = json::array();
  for (const CompareCell& cell : report.cells) {
    json c;
    c["front"] = cell.front;
    c["n_bases"] = cell.n_bases ? json(*cell.n_bases) : json(nullptr);
    c["initializer"] = cell.initializer ? json(*cell.initializer) : json(nullptr);
    if (cell.ok) {
      c["micro_f1"] = cell.metrics.micro_f1;
      c["macro_f1"] = cell.metrics.macro_f1;
      c["sparsity_before"] = cell.metrics.sparsity_before;
      c["sparsity_after"] = cell.metrics.sparsity_after;
      c["pct_change_micro_f1"] =
          cell.pct_change_micro_f1 ? json(*cell.pct_change_micro_f1) : json(nullptr);
      c["error"] = nullptr;
    } else {
      c["micro_f1"] = nullptr;
      c["macro_f1"] = nullptr;
      c["sparsity_before"] = nullptr;
      c["sparsity_after"] = nullptr;
      c["pct_change_micro_f1"] = nullptr;
      c["error"] = {{"type", cell.error_type}, {"message", cell.error_message}};
    }
    c["steps"] = report.config.steps;
    c["seed"] = report.config.seed;
    cells.push_back(c);
  }
  return {
      {"format_version", 1},
      {"kind", "compare_report"},
      {"config", config_to_json(report.config)},
      {"baseline_micro_f1",
       report.baseline_micro_f1 ? json(*report.baseline_micro_f1) : json(nullptr)},
      {"cells", cells},
  };
}

void write_compare_csv(const ComparisonReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("compare csv: cannot open " + path.string());
  out << "front,n_bases,initializer,micro_f1,macro_f1,sparsity_after,"
         "pct_change_micro_f1,error\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const CompareCell& cell : report.cells) {
    out << cell.front << ',';
    if (cell.n_bases) out << *cell.n_bases;
    out << ',';
    if (cell.initializer) out << *cell.initializer;
    out << ',';
    if (cell.ok) {
      out << fmt(cell.metrics.micro_f1) << ',' << fmt(cell.metrics.macro_f1) << ','
          << fmt(cell.metrics.sparsity_after) << ',';
      if (cell.pct_change_micro_f1) out << fmt(*cell.pct_change_micro_f1);
      out << ",";
    } else {
      out << ",,,," << cell.error_type;
    }
    out << '\n';
  }
  if (!out) throw DataError("compare csv: write failed for " + path.string());
}

}  // namespace bpl
