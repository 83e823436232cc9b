#include "bpl/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

#include "bpl/checkpoint.hpp"
#include "bpl/errors.hpp"
#include "bpl/random.hpp"

namespace bpl {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

ModelConfig model_config_from(const ExperimentConfig& c, Index f_dim, Index n_classes) {
  ModelConfig mc;
  mc.front = front_kind_from_string(c.front);
  mc.f_dim = f_dim;
  mc.front_out = c.n_bases;
  mc.width = c.width;
  mc.blocks = c.blocks;
  mc.kernel_size = c.kernel_size;
  mc.n_classes = n_classes;
  mc.norm_type = c.norm_type;
  mc.denominator = denominator_from_string(c.denominator);
  return mc;
}

LabelMatrix labels_for(const Dataset& d, const std::vector<Index>& indices) {
  LabelMatrix y(static_cast<Index>(indices.size()), d.n_classes());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    y.row(static_cast<Index>(i)) =
        d.samples[static_cast<std::size_t>(indices[i])].labels.transpose();
  }
  return y;
}

}  // namespace

Dataset resolve_dataset(const ExperimentConfig& config) {
  if (!config.dataset_dir.empty()) return load_dataset(config.dataset_dir);
  return generate_synthetic(config.synthetic);
}

std::pair<Dataset, Dataset> resolve_split(const ExperimentConfig& config,
                                          const Dataset& full) {
  if (config.test_fraction == 0.0) return {full, Dataset{}};
  return train_test_split(full, config.test_fraction, config.seed);
}

Matrix stack_elements(const Dataset& d, Index max_rows) {
  const Index total = d.n_samples() * d.t_dim;
  const Index rows = std::min(total, max_rows);
  Matrix out(rows, d.f_dim);
  for (Index i = 0; i < rows; ++i) {
    const Index flat = (total <= max_rows) ? i : (i * total) / rows;
    const Index sample = flat / d.t_dim;
    const Index t = flat % d.t_dim;
    out.row(i) = d.samples[static_cast<std::size_t>(sample)].intensities.row(t);
  }
  return out;
}

ClassifierModel build_model(const ExperimentConfig& config, const Dataset& train) {
  ClassifierModel model =
      make_model(model_config_from(config, train.f_dim, train.n_classes()), config.seed);
  if (model.config.front == FrontKind::kBasisProjection) {
    InitSpec spec;
    spec.method = init_method_from_string(config.initializer);
    spec.seed = config.seed;
    spec.concentration = config.concentration;
    if (spec.method == InitMethod::kSvd || spec.method == InitMethod::kNmf) {
      spec.data = stack_elements(train, config.max_init_elements);
    }
    set_front_bases(model, init_bases(spec, config.n_bases, train.f_dim));
  }
  return model;
}

TrainState init_train_state(const ExperimentConfig& config, const Dataset& train) {
  TrainState state;
  state.config = config;
  state.model = build_model(config, train);
  state.adam.beta1 = config.beta1;
  state.adam.beta2 = config.beta2;
  state.adam.eps_hat = config.eps_hat;
  state.adam.base_lr = config.lr_max;
  if (state.model.config.front == FrontKind::kBasisProjection) {
    state.initial_bases = state.model.basis.bases;
  }
  return state;
}

std::vector<Index> batch_for_step(std::uint64_t seed, long step, Index n_samples,
                                  Index batch_size) {
  if (n_samples < 1) throw std::invalid_argument("batch_for_step: empty dataset");
  const Index effective = std::min(batch_size, n_samples);
  const long batches_per_epoch = std::max<long>(1, n_samples / effective);
  const long epoch = step / batches_per_epoch;
  const long pos = step % batches_per_epoch;

  std::vector<Index> order(static_cast<std::size_t>(n_samples));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(mix_seed(seed, kStreamEpochShuffle, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);

  const auto begin = order.begin() + static_cast<std::ptrdiff_t>(pos * effective);
  return {begin, begin + static_cast<std::ptrdiff_t>(effective)};
}

void train_loop(TrainState& state, const Dataset& train, std::ostream* log,
                long stop_after_step) {
  const ExperimentConfig& config = state.config;
  if (train.n_samples() < 1) throw std::invalid_argument("train_loop: empty dataset");

  const CosineSchedule sched{config.lr_max, config.lr_min, config.steps};
  const long stop =
      stop_after_step < 0 ? config.steps : std::min(config.steps, stop_after_step);
  std::vector<ParamBlock> blocks = param_blocks(state.model);
  ModelForwardCache cache;

  for (; state.step < stop; ++state.step) {
    const double lr = lr_at_step(state.step, sched);
    const std::vector<Index> indices =
        batch_for_step(config.seed, state.step, train.n_samples(), config.batch_size);

    Batch x;
    x.reserve(indices.size());
    for (const Index i : indices) {
      x.push_back(train.samples[static_cast<std::size_t>(i)].intensities);
    }
    const LabelMatrix y = labels_for(train, indices);

    const Matrix logits = model_forward(x, state.model, cache);
    const LossValue loss = bce_loss(logits, y);
    if (!std::isfinite(loss.value)) {
      throw NumericalError("training: loss is not finite at step " +
                           std::to_string(state.step));
    }
    zero_gradients(state.model);
    model_backward(loss.grad_logits, state.model, cache);
    adam_step(blocks, state.adam, lr);
    state.history.loss.push_back(loss.value);

    const long done = state.step + 1;
    if (done % config.eval_interval == 0 || done == config.steps) {
      const MetricsReport m =
          evaluate_model(state.model, train, config.threshold, config.batch_size);
      state.history.eval_steps.push_back(done);
      state.history.train_micro_f1.push_back(m.micro_f1);
      state.history.train_macro_f1.push_back(m.macro_f1);
      if (log) {
        *log << "step " << done << "/" << config.steps << "  lr " << lr << "  loss "
             << loss.value << "  train micro-F1 " << m.micro_f1 << "\n";
      }
    }
  }
}

MetricsReport evaluate_model(const ClassifierModel& model, const Dataset& data,
                             double threshold, Index batch_size) {
  if (data.n_samples() < 1) throw std::invalid_argument("evaluate_model: empty dataset");

  Matrix probabilities(data.n_samples(), model.config.n_classes);
  double zeros_before = 0.0, total_before = 0.0;
  double zeros_after = 0.0, total_after = 0.0;

  ModelForwardCache cache;
  for (Index start = 0; start < data.n_samples(); start += batch_size) {
    const Index count = std::min(batch_size, data.n_samples() - start);
    Batch x;
    x.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      x.push_back(data.samples[static_cast<std::size_t>(start + i)].intensities);
    }
    const Matrix logits = model_forward(x, model, cache);
    probabilities.middleRows(start, count) = sigmoid(logits);
    for (Index i = 0; i < count; ++i) {
      const Matrix& before = cache.input[static_cast<std::size_t>(i)];
      const Matrix& after = cache.front_out[static_cast<std::size_t>(i)];
      zeros_before += sparsity_ratio(before) * static_cast<double>(before.size());
      total_before += static_cast<double>(before.size());
      zeros_after += sparsity_ratio(after) * static_cast<double>(after.size());
      total_after += static_cast<double>(after.size());
    }
  }

  LabelMatrix truth(data.n_samples(), data.n_classes());
  for (Index i = 0; i < data.n_samples(); ++i) {
    truth.row(i) = data.samples[static_cast<std::size_t>(i)].labels.transpose();
  }
  const LabelMatrix pred = threshold_predict(probabilities, threshold);

  MetricsReport report;
  report.micro_f1 = multilabel_f1(pred, truth, F1Mode::kMicro);
  report.macro_f1 = multilabel_f1(pred, truth, F1Mode::kMacro);
  report.per_class = per_class_scores(pred, truth);
  report.sparsity_before = zeros_before / total_before;
  report.sparsity_after = zeros_after / total_after;
  return report;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  BlockFile file;
  file.header["format_version"] = kCheckpointVersion;
  file.header["kind"] = "checkpoint";
  file.header["step"] = state.step;
  file.header["config"] = config_to_json(state.config);
  file.header["model"] = {
      {"f_dim", state.model.config.f_dim},
      {"n_classes", state.model.config.n_classes},
  };
  file.header["adam"] = {
      {"beta1", state.adam.beta1},     {"beta2", state.adam.beta2},
      {"eps_hat", state.adam.eps_hat}, {"base_lr", state.adam.base_lr},
      {"step", state.adam.step},
  };
  file.header["history"] = {
      {"loss", state.history.loss},
      {"eval_steps", state.history.eval_steps},
      {"train_micro_f1", state.history.train_micro_f1},
      {"train_macro_f1", state.history.train_macro_f1},
  };

  // Parameter and moment blocks share the visitation order of param_blocks.
  std::vector<ParamBlock> blocks =
      param_blocks(const_cast<ClassifierModel&>(state.model));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ParamBlock& b = blocks[i];
    file.blocks.emplace_back(b.name, std::vector<double>(b.value, b.value + b.size));
  }
  if (!state.adam.m.empty()) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& m = state.adam.m[i];
      const auto& v = state.adam.v[i];
      file.blocks.emplace_back("adam.m." + blocks[i].name,
                               std::vector<double>(m.data(), m.data() + m.size()));
      file.blocks.emplace_back("adam.v." + blocks[i].name,
                               std::vector<double>(v.data(), v.data() + v.size()));
    }
  }
  if (state.initial_bases.size() > 0) {
    file.blocks.emplace_back(
        "initial.bases",
        std::vector<double>(state.initial_bases.data(),
                            state.initial_bases.data() + state.initial_bases.size()));
  }
  write_block_file(path, file);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const BlockFile file = read_block_file(path);
  if (!file.header.contains("kind") || file.header["kind"] != "checkpoint") {
    throw DataError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  if (file.header.at("format_version").get<int>() != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version");
  }

  TrainState state;
  state.config = config_from_json(file.header.at("config"));
  state.step = file.header.at("step").get<long>();

  const json& model_info = file.header.at("model");
  const Index f_dim = model_info.at("f_dim").get<Index>();
  const Index n_classes = model_info.at("n_classes").get<Index>();
  state.model = make_model(model_config_from(state.config, f_dim, n_classes),
                           state.config.seed);

  const json& adam = file.header.at("adam");
  state.adam.beta1 = adam.at("beta1").get<double>();
  state.adam.beta2 = adam.at("beta2").get<double>();
  state.adam.eps_hat = adam.at("eps_hat").get<double>();
  state.adam.base_lr = adam.at("base_lr").get<double>();
  state.adam.step = adam.at("step").get<long>();

  const json& history = file.header.at("history");
  state.history.loss = history.at("loss").get<std::vector<double>>();
  state.history.eval_steps = history.at("eval_steps").get<std::vector<long>>();
  state.history.train_micro_f1 = history.at("train_micro_f1").get<std::vector<double>>();
  state.history.train_macro_f1 = history.at("train_macro_f1").get<std::vector<double>>();

  std::vector<ParamBlock> blocks = param_blocks(state.model);
  for (ParamBlock& b : blocks) {
    const std::vector<double>& values = file.block(b.name);
    if (static_cast<Index>(values.size()) != b.size) {
      throw DataError("checkpoint: block '" + b.name + "' has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(b.size));
    }
    std::copy(values.begin(), values.end(), b.value);
  }
  if (file.has_block("adam.m." + blocks.front().name)) {
    state.adam.m.reserve(blocks.size());
    state.adam.v.reserve(blocks.size());
    for (const ParamBlock& b : blocks) {
      const std::vector<double>& m = file.block("adam.m." + b.name);
      const std::vector<double>& v = file.block("adam.v." + b.name);
      if (static_cast<Index>(m.size()) != b.size ||
          static_cast<Index>(v.size()) != b.size) {
        throw DataError("checkpoint: moment size mismatch for '" + b.name + "'");
      }
      state.adam.m.push_back(Eigen::Map<const Eigen::ArrayXd>(m.data(), b.size));
      state.adam.v.push_back(Eigen::Map<const Eigen::ArrayXd>(v.data(), b.size));
    }
  }
  if (file.has_block("initial.bases")) {
    const std::vector<double>& values = file.block("initial.bases");
    state.initial_bases = Eigen::Map<const Matrix>(
        values.data(), state.model.basis.bases.rows(), state.model.basis.bases.cols());
  }
  return state;
}

void save_bases(const Eigen::Ref<const Matrix>& bases, const std::filesystem::path& path) {
  BlockFile file;
  file.header["format_version"] = 1;
  file.header["kind"] = "bases";
  file.header["n_bases"] = bases.rows();
  file.header["element_dim"] = bases.cols();
  Matrix copy = bases;  // ensure contiguous column-major storage
  file.blocks.emplace_back("bases",
                           std::vector<double>(copy.data(), copy.data() + copy.size()));
  write_block_file(path, file);
}

Matrix load_bases(const std::filesystem::path& path) {
  const BlockFile file = read_block_file(path);
  if (!file.header.contains("kind") || file.header["kind"] != "bases") {
    throw DataError("bases file: " + path.string() + " is not a bases file");
  }
  const Index n = file.header.at("n_bases").get<Index>();
  const Index f = file.header.at("element_dim").get<Index>();
  const std::vector<double>& values = file.block("bases");
  if (static_cast<Index>(values.size()) != n * f) {
    throw DataError("bases file: value count mismatch");
  }
  return Eigen::Map<const Matrix>(values.data(), n, f);
}

json metrics_to_json(const MetricsReport& metrics) {
  json per_class = json::array();
  for (const ClassScore& s : metrics.per_class) {
    per_class.push_back(
        {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
  }
  return {
      {"micro_f1", metrics.micro_f1},
      {"macro_f1", metrics.macro_f1},
      {"per_class", per_class},
      {"sparsity_before", metrics.sparsity_before},
      {"sparsity_after", metrics.sparsity_after},
  };
}

json train_report_json(const TrainState& state, const MetricsReport& train_metrics,
                       const MetricsReport* test_metrics) {
  json report;
  report["format_version"] = 1;
  report["kind"] = "train_report";
  report["config"] = config_to_json(state.config);
  report["final_step"] = state.step;
  report["history"] = {
      {"loss", state.history.loss},
      {"eval_steps", state.history.eval_steps},
      {"train_micro_f1", state.history.train_micro_f1},
      {"train_macro_f1", state.history.train_macro_f1},
  };
  report["final_train"] = metrics_to_json(train_metrics);
  report["final_test"] = test_metrics ? metrics_to_json(*test_metrics) : json(nullptr);
  return report;
}

json eval_report_json(const MetricsReport& metrics, const std::string& dataset) {
  return {
      {"format_version", 1},
      {"kind", "eval_report"},
      {"dataset", dataset},
      {"metrics", metrics_to_json(metrics)},
  };
}

}  // namespace bpl
