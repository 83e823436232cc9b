#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpl/compare.hpp"
#include "bpl/config.hpp"
#include "bpl/errors.hpp"
#include "bpl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  bool force = false;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

void prepare_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) {
      throw std::invalid_argument("output path " + out.string() + " is not a directory");
    }
    if (!fs::is_empty(out) && !force) {
      throw std::invalid_argument("output directory " + out.string() +
                                  " is not empty (pass --force to overwrite)");
    }
  } else {
    fs::create_directories(out);
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw bpl::DataError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
}

bpl::ExperimentConfig load_config(const CommonOpts& opts) {
  bpl::ExperimentConfig config = opts.config_path.empty()
                                     ? bpl::ExperimentConfig{}
                                     : bpl::load_config_file(opts.config_path);
  if (opts.seed_set) config.seed = opts.seed;
  bpl::validate_config(config);
  return config;
}

int cmd_gen_data(const CommonOpts& opts) {
  bpl::ExperimentConfig config = load_config(opts);
  if (opts.seed_set) config.synthetic.seed = opts.seed;

  const bpl::Dataset dataset = bpl::generate_synthetic(config.synthetic);
  prepare_out_dir(opts.out_dir, opts.force);
  bpl::save_dataset(dataset, opts.out_dir);

  json spec = {
      {"n_samples", config.synthetic.n_samples},
      {"t_dim", config.synthetic.t_dim},
      {"f_dim", config.synthetic.f_dim},
      {"n_classes", config.synthetic.n_classes},
      {"target_sparsity", config.synthetic.target_sparsity},
      {"peaks_per_class", config.synthetic.peaks_per_class},
      {"noise_scale", config.synthetic.noise_scale},
      {"seed", config.synthetic.seed},
  };
  write_json_file(fs::path(opts.out_dir) / "generation_spec.json", spec);

  bpl::Batch all;
  for (const auto& s : dataset.samples) all.push_back(s.intensities);
  std::cerr << "wrote " << dataset.n_samples() << " samples to " << opts.out_dir
            << " (sparsity " << bpl::sparsity_ratio(all) << ")\n";
  return bpl::kExitOk;
}

int cmd_train(const CommonOpts& opts, const std::string& resume_path) {
  bpl::TrainState state;
  bpl::Dataset train, test;
  if (!resume_path.empty()) {
    state = bpl::load_checkpoint(resume_path);
    if (opts.seed_set && opts.seed != state.config.seed) {
      throw std::invalid_argument("--seed cannot change a resumed run");
    }
    const bpl::Dataset full = bpl::resolve_dataset(state.config);
    std::tie(train, test) = bpl::resolve_split(state.config, full);
  } else {
    const bpl::ExperimentConfig config = load_config(opts);
    const bpl::Dataset full = bpl::resolve_dataset(config);
    std::tie(train, test) = bpl::resolve_split(config, full);
    state = bpl::init_train_state(config, train);
  }

  prepare_out_dir(opts.out_dir, opts.force);
  const fs::path out(opts.out_dir);
  write_json_file(out / "resolved_config.json", bpl::config_to_json(state.config));
  if (state.initial_bases.size() > 0) {
    bpl::save_bases(state.initial_bases, out / "initial_bases.bpl");
  }

  bpl::train_loop(state, train, &std::cerr);
  bpl::save_checkpoint(state, out / "checkpoint.bpl");

  const bpl::MetricsReport train_metrics = bpl::evaluate_model(
      state.model, train, state.config.threshold, state.config.batch_size);
  bpl::MetricsReport test_metrics;
  const bool have_test = test.n_samples() > 0;
  if (have_test) {
    test_metrics = bpl::evaluate_model(state.model, test, state.config.threshold,
                                       state.config.batch_size);
  }
  write_json_file(out / "train_report.json",
                  bpl::train_report_json(state, train_metrics,
                                         have_test ? &test_metrics : nullptr));
  std::cerr << "final train micro-F1 " << train_metrics.micro_f1;
  if (have_test) std::cerr << ", test micro-F1 " << test_metrics.micro_f1;
  std::cerr << "\n";
  return bpl::kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                 const CommonOpts& opts, const std::string& split) {
  bpl::TrainState state = bpl::load_checkpoint(checkpoint_path);
  bpl::Dataset data = bpl::load_dataset(data_dir);
  if (split != "all") {
    if (state.config.test_fraction == 0.0) {
      throw std::invalid_argument("--split " + split +
                                  ": checkpoint was trained without a test fraction");
    }
    auto [train, test] =
        bpl::train_test_split(data, state.config.test_fraction, state.config.seed);
    data = (split == "test") ? std::move(test) : std::move(train);
  }
  if (data.f_dim != state.model.config.f_dim ||
      data.n_classes() != state.model.config.n_classes) {
    throw bpl::DataError("evaluate: dataset shape " + std::to_string(data.f_dim) + "/" +
                         std::to_string(data.n_classes()) +
                         " does not match model " +
                         std::to_string(state.model.config.f_dim) + "/" +
                         std::to_string(state.model.config.n_classes));
  }

  const bpl::MetricsReport metrics = bpl::evaluate_model(
      state.model, data, state.config.threshold, state.config.batch_size);
  prepare_out_dir(opts.out_dir, opts.force);
  write_json_file(fs::path(opts.out_dir) / "eval_report.json",
                  bpl::eval_report_json(metrics, data_dir));
  std::cerr << "micro-F1 " << metrics.micro_f1 << ", macro-F1 " << metrics.macro_f1
            << ", sparsity " << metrics.sparsity_before << " -> "
            << metrics.sparsity_after << "\n";
  return bpl::kExitOk;
}

int cmd_compare(const CommonOpts& opts) {
  const bpl::ExperimentConfig config = load_config(opts);
  const bpl::ComparisonReport report = bpl::run_compare(config, &std::cerr);
  prepare_out_dir(opts.out_dir, opts.force);
  const fs::path out(opts.out_dir);
  write_json_file(out / "resolved_config.json", bpl::config_to_json(config));
  write_json_file(out / "compare_report.json", bpl::compare_report_json(report));
  bpl::write_compare_csv(report, out / "compare_report.csv");
  return bpl::kExitOk;
}

int cmd_inspect_bases(const std::string& checkpoint_path, const std::string& initial_path,
                      const std::string& components_from, bool include_initial,
                      const std::string& out_csv) {
  bpl::TrainState state = bpl::load_checkpoint(checkpoint_path);
  if (state.model.config.front != bpl::FrontKind::kBasisProjection) {
    throw std::invalid_argument("inspect-bases: checkpoint has no basis-projection front");
  }

  std::vector<std::pair<std::string, bpl::Matrix>> sets;
  sets.emplace_back("learned", bpl::clamp_bases(state.model.basis).bases);
  if (!initial_path.empty()) {
    sets.emplace_back("initial", bpl::load_bases(initial_path));
  } else if (include_initial) {
    if (state.initial_bases.size() == 0) {
      throw std::invalid_argument("inspect-bases: checkpoint carries no initial bases");
    }
    sets.emplace_back("initial", state.initial_bases);
  }
  if (!components_from.empty()) {
    const bpl::Dataset data = bpl::load_dataset(components_from);
    const bpl::Matrix elements =
        bpl::stack_elements(data, state.config.max_init_elements);
    const bpl::Index n = state.model.config.front_out;
    bpl::InitSpec svd_spec;
    svd_spec.method = bpl::InitMethod::kSvd;
    svd_spec.seed = state.config.seed;
    svd_spec.data = elements;
    sets.emplace_back("svd", bpl::init_bases(svd_spec, n, data.f_dim).bases);
    bpl::InitSpec nmf_spec = svd_spec;
    nmf_spec.method = bpl::InitMethod::kNmf;
    sets.emplace_back("nmf", bpl::init_bases(nmf_spec, n, data.f_dim).bases);
  }

  bpl::export_basis_embedding(sets, out_csv);
  std::cerr << "wrote " << out_csv << " with " << sets.size() << " sets\n";
  return bpl::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"basis-projected layer experiments on pattern-sparse spectra"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string resume_path, checkpoint_path, data_dir, split = "all";
  std::string initial_path, components_from, out_csv;
  bool include_initial = false;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON");
    cmd->add_option("--seed", opts.seed, "seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    if (needs_out) {
      cmd->add_option("--out", opts.out_dir, "output directory")->required();
      cmd->add_flag("--force", opts.force, "overwrite a non-empty output directory");
    }
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset directory");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train a classifier, write checkpoint");
  add_common(train);
  train->add_option("--resume", resume_path, "checkpoint to continue from");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  evaluate->add_option("--data", data_dir, "dataset directory")->required();
  evaluate->add_option("--split", split, "all | train | test")
      ->check(CLI::IsMember({"all", "train", "test"}));

  CLI::App* compare = app.add_subcommand("compare", "front-layer / initializer grid");
  add_common(compare);

  CLI::App* inspect = app.add_subcommand("inspect-bases", "2-d embedding CSV of bases");
  inspect->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  inspect->add_option("--initial", initial_path, "bases file with the initial bases");
  inspect->add_flag("--include-initial", include_initial,
                    "also embed the initial bases stored in the checkpoint");
  inspect->add_option("--components-from", components_from,
                      "dataset directory for svd/nmf component sets");
  inspect->add_option("--out", out_csv, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? bpl::kExitOk : bpl::kExitConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (train->parsed()) return cmd_train(opts, resume_path);
    if (evaluate->parsed()) return cmd_evaluate(checkpoint_path, data_dir, opts, split);
    if (compare->parsed()) return cmd_compare(opts);
    if (inspect->parsed()) {
      return cmd_inspect_bases(checkpoint_path, initial_path, components_from,
                               include_initial, out_csv);
    }
  } catch (const bpl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return bpl::kExitNumericalError;
  } catch (const bpl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return bpl::kExitDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return bpl::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return bpl::kExitOk;
}
