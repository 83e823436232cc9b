#include "bpl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for '" + std::string(key) + "'");
  }
}

}  // namespace

FrontKind front_kind_from_string(const std::string& name) {
  if (name == "none") return FrontKind::kIdentity;
  if (name == "unit_vec") return FrontKind::kUnitVectorization;
  if (name == "fcl") return FrontKind::kFullyConnected;
  if (name == "bpl") return FrontKind::kBasisProjection;
  throw std::invalid_argument("config: unknown front '" + name +
                              "' (expected none|unit_vec|fcl|bpl)");
}

std::string front_kind_to_string(FrontKind kind) {
  switch (kind) {
    case FrontKind::kIdentity: return "none";
    case FrontKind::kUnitVectorization: return "unit_vec";
    case FrontKind::kFullyConnected: return "fcl";
    case FrontKind::kBasisProjection: return "bpl";
  }
  throw std::invalid_argument("config: bad front kind");
}

InitMethod init_method_from_string(const std::string& name) {
  if (name == "von_mises") return InitMethod::kVonMises;
  if (name == "multivariate_normal") return InitMethod::kMultivariateNormal;
  if (name == "svd") return InitMethod::kSvd;
  if (name == "nmf") return InitMethod::kNmf;
  throw std::invalid_argument(
      "config: unknown initializer '" + name +
      "' (expected von_mises|multivariate_normal|svd|nmf)");
}

Denominator denominator_from_string(const std::string& name) {
  if (name == "norm") return Denominator::kNorm;
  if (name == "norm_squared") return Denominator::kNormSquared;
  throw std::invalid_argument("config: unknown denominator '" + name +
                              "' (expected norm|norm_squared)");
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: root must be an object");
  reject_unknown_keys(j, {"data", "model", "training", "seed", "compare"}, "root");

  ExperimentConfig c;
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"dataset_dir", "synthetic", "test_fraction"}, "data");
    read_field(d, "dataset_dir", c.dataset_dir);
    read_field(d, "test_fraction", c.test_fraction);
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      reject_unknown_keys(s,
                          {"n_samples", "t_dim", "f_dim", "n_classes", "target_sparsity",
                           "peaks_per_class", "noise_scale", "seed"},
                          "data.synthetic");
      read_field(s, "n_samples", c.synthetic.n_samples);
      read_field(s, "t_dim", c.synthetic.t_dim);
      read_field(s, "f_dim", c.synthetic.f_dim);
      read_field(s, "n_classes", c.synthetic.n_classes);
      read_field(s, "target_sparsity", c.synthetic.target_sparsity);
      read_field(s, "peaks_per_class", c.synthetic.peaks_per_class);
      read_field(s, "noise_scale", c.synthetic.noise_scale);
      read_field(s, "seed", c.synthetic.seed);
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown_keys(m,
                        {"front", "n_bases", "initializer", "concentration", "width",
                         "blocks", "kernel_size", "norm_type", "denominator",
                         "max_init_elements"},
                        "model");
    read_field(m, "front", c.front);
    read_field(m, "n_bases", c.n_bases);
    read_field(m, "initializer", c.initializer);
    read_field(m, "concentration", c.concentration);
    read_field(m, "width", c.width);
    read_field(m, "blocks", c.blocks);
    read_field(m, "kernel_size", c.kernel_size);
    read_field(m, "norm_type", c.norm_type);
    read_field(m, "denominator", c.denominator);
    read_field(m, "max_init_elements", c.max_init_elements);
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    reject_unknown_keys(t,
                        {"steps", "batch_size", "lr_max", "lr_min", "beta1", "beta2",
                         "eps_hat", "eval_interval", "threshold"},
                        "training");
    read_field(t, "steps", c.steps);
    read_field(t, "batch_size", c.batch_size);
    read_field(t, "lr_max", c.lr_max);
    read_field(t, "lr_min", c.lr_min);
    read_field(t, "beta1", c.beta1);
    read_field(t, "beta2", c.beta2);
    read_field(t, "eps_hat", c.eps_hat);
    read_field(t, "eval_interval", c.eval_interval);
    read_field(t, "threshold", c.threshold);
  }
  read_field(j, "seed", c.seed);
  if (j.contains("compare")) {
    const json& g = j.at("compare");
    reject_unknown_keys(g, {"fronts", "sizes", "initializers"}, "compare");
    read_field(g, "fronts", c.compare.fronts);
    read_field(g, "sizes", c.compare.sizes);
    read_field(g, "initializers", c.compare.initializers);
  }
  validate_config(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["data"]["dataset_dir"] = c.dataset_dir;
  j["data"]["test_fraction"] = c.test_fraction;
  j["data"]["synthetic"] = {
      {"n_samples", c.synthetic.n_samples},
      {"t_dim", c.synthetic.t_dim},
      {"f_dim", c.synthetic.f_dim},
      {"n_classes", c.synthetic.n_classes},
      {"target_sparsity", c.synthetic.target_sparsity},
      {"peaks_per_class", c.synthetic.peaks_per_class},
      {"noise_scale", c.synthetic.noise_scale},
      {"seed", c.synthetic.seed},
  };
  j["model"] = {
      {"front", c.front},
      {"n_bases", c.n_bases},
      {"initializer", c.initializer},
      {"concentration", c.concentration},
      {"width", c.width},
      {"blocks", c.blocks},
      {"kernel_size", c.kernel_size},
      {"norm_type", c.norm_type},
      {"denominator", c.denominator},
      {"max_init_elements", c.max_init_elements},
  };
  j["training"] = {
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"lr_max", c.lr_max},
      {"lr_min", c.lr_min},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps_hat", c.eps_hat},
      {"eval_interval", c.eval_interval},
      {"threshold", c.threshold},
  };
  j["seed"] = c.seed;
  j["compare"] = {
      {"fronts", c.compare.fronts},
      {"sizes", c.compare.sizes},
      {"initializers", c.compare.initializers},
  };
  return j;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const ExperimentConfig& c) {
  const FrontKind front = front_kind_from_string(c.front);
  const InitMethod method = init_method_from_string(c.initializer);
  denominator_from_string(c.denominator);

  if (!(c.test_fraction >= 0.0 && c.test_fraction < 1.0)) {
    throw std::invalid_argument("config: test_fraction must be in [0, 1)");
  }
  if (c.n_bases < 1) throw std::invalid_argument("config: n_bases must be >= 1");
  if (c.width < 1 || c.blocks < 1) {
    throw std::invalid_argument("config: width and blocks must be >= 1");
  }
  if (c.kernel_size < 1 || c.kernel_size % 2 == 0) {
    throw std::invalid_argument("config: kernel_size must be odd");
  }
  if (!(c.norm_type > 0.0)) throw std::invalid_argument("config: norm_type must be > 0");
  if (!(c.concentration > 0.0)) {
    throw std::invalid_argument("config: concentration must be > 0");
  }
  if (c.steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  if (c.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(c.lr_max > 0.0) || c.lr_min < 0.0 || c.lr_min > c.lr_max) {
    throw std::invalid_argument("config: need 0 <= lr_min <= lr_max and lr_max > 0");
  }
  if (c.eval_interval < 1) throw std::invalid_argument("config: eval_interval must be >= 1");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    throw std::invalid_argument("config: threshold must be in [0, 1]");
  }
  if (c.max_init_elements < 1) {
    throw std::invalid_argument("config: max_init_elements must be >= 1");
  }
  if (c.dataset_dir.empty()) {
    // Throws on invalid synthetic parameters (including a degenerate target
    // sparsity) without generating anything.
    if (!(c.synthetic.target_sparsity > 0.0 && c.synthetic.target_sparsity < 1.0)) {
      throw std::invalid_argument("config: synthetic target_sparsity must be in (0, 1)");
    }
    if (c.synthetic.n_samples < 1 || c.synthetic.t_dim < 1 || c.synthetic.f_dim < 1 ||
        c.synthetic.n_classes < 1 || c.synthetic.peaks_per_class < 1) {
      throw std::invalid_argument("config: synthetic counts must be >= 1");
    }
    if (c.synthetic.noise_scale < 0.0) {
      throw std::invalid_argument("config: synthetic noise_scale must be >= 0");
    }
    // svd/nmf can supply at most min(element count, F) bases
    if (front == FrontKind::kBasisProjection &&
        (method == InitMethod::kSvd || method == InitMethod::kNmf)) {
      const Index max_rank = std::min(c.synthetic.n_samples * c.synthetic.t_dim,
                                      c.synthetic.f_dim);
      if (c.n_bases > max_rank) {
        throw CapacityError("config: initializer '" + c.initializer +
                            "' cannot supply " + std::to_string(c.n_bases) +
                            " bases (max " + std::to_string(max_rank) + ")");
      }
    }
  }
  for (const std::string& f : c.compare.fronts) front_kind_from_string(f);
  for (const std::string& i : c.compare.initializers) init_method_from_string(i);
  for (const Index s : c.compare.sizes) {
    if (s < 1) throw std::invalid_argument("config: compare sizes must be >= 1");
  }
}

}  // namespace bpl
