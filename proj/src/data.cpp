#include "bpl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "bpl/binary_io.hpp"
#include "bpl/errors.hpp"
#include "bpl/random.hpp"

namespace bpl {

namespace {

constexpr double kZeroThreshold = 1e-15;
constexpr char kSampleMagic[4] = {'G', 'C', 'M', 'S'};
constexpr std::uint32_t kSampleFormatVersion = 1;
constexpr double kSparsitySlack = 0.02;

using nlohmann::json;

int line_of_byte(const std::string& text, std::size_t byte) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() +
                                             static_cast<std::ptrdiff_t>(
                                                 std::min(byte, text.size())),
                                         '\n'));
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_samples < 1 || spec.t_dim < 1 || spec.f_dim < 1 || spec.n_classes < 1 ||
      spec.peaks_per_class < 1) {
    throw std::invalid_argument("synthetic spec: counts must be >= 1");
  }
  if (!(spec.target_sparsity > 0.0 && spec.target_sparsity < 1.0)) {
    throw std::invalid_argument("synthetic spec: target_sparsity must be in (0, 1)");
  }
  if (spec.noise_scale < 0.0) {
    throw std::invalid_argument("synthetic spec: noise_scale must be >= 0");
  }
}

}  // namespace

double sparsity_ratio(const Eigen::Ref<const Matrix>& x) {
  if (x.size() == 0) throw std::invalid_argument("sparsity_ratio: empty array");
  const Index zeros = (x.array().abs() < kZeroThreshold).count();
  return static_cast<double>(zeros) / static_cast<double>(x.size());
}

double sparsity_ratio(const Batch& x) {
  long long zeros = 0, total = 0;
  for (const Matrix& m : x) {
    zeros += (m.array().abs() < kZeroThreshold).count();
    total += m.size();
  }
  if (total == 0) throw std::invalid_argument("sparsity_ratio: empty batch");
  return static_cast<double>(zeros) / static_cast<double>(total);
}

std::vector<std::vector<Peak>> synthetic_class_peaks(const SyntheticSpec& spec) {
  validate_spec(spec);
  const double t = static_cast<double>(spec.t_dim);
  const double f = static_cast<double>(spec.f_dim);
  std::vector<std::vector<Peak>> peaks(static_cast<std::size_t>(spec.n_classes));
  for (Index c = 0; c < spec.n_classes; ++c) {
    Rng rng(mix_seed(spec.seed, kStreamClassPeaks, static_cast<std::uint64_t>(c)));
    auto& owned = peaks[static_cast<std::size_t>(c)];
    owned.reserve(static_cast<std::size_t>(spec.peaks_per_class));
    for (Index p = 0; p < spec.peaks_per_class; ++p) {
      Peak peak;
      peak.t_center = rng.uniform(0.1 * t, 0.9 * t);
      peak.f_center = rng.uniform(0.1 * f, 0.9 * f);
      peak.sigma_t = rng.uniform(std::max(1.0, t / 64.0), std::max(1.5, t / 24.0));
      peak.sigma_f = rng.uniform(std::max(0.8, f / 48.0), std::max(1.2, f / 16.0));
      peak.amplitude = rng.uniform(0.6, 1.2);
      owned.push_back(peak);
    }
  }
  return peaks;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  const auto peaks = synthetic_class_peaks(spec);
  const Index total = spec.t_dim * spec.f_dim;
  const Index target_zeros =
      static_cast<Index>(std::llround(spec.target_sparsity * static_cast<double>(total)));

  Dataset out;
  out.t_dim = spec.t_dim;
  out.f_dim = spec.f_dim;
  for (Index c = 0; c < spec.n_classes; ++c) {
    out.class_names.push_back("class_" + std::to_string(c));
  }

  std::vector<Index> class_order(static_cast<std::size_t>(spec.n_classes));
  for (Index i = 0; i < spec.n_samples; ++i) {
    Rng rng(mix_seed(spec.seed, kStreamSampleNoise, static_cast<std::uint64_t>(i)));

    const Index max_labels = std::min<Index>(3, spec.n_classes);
    const Index n_labels = 1 + static_cast<Index>(rng.integer(static_cast<std::uint64_t>(max_labels)));
    std::iota(class_order.begin(), class_order.end(), Index{0});
    rng.shuffle(class_order);

    SpectrumSample sample;
    sample.labels = Eigen::VectorXi::Zero(spec.n_classes);
    sample.intensities = Matrix::Zero(spec.t_dim, spec.f_dim);
    for (Index l = 0; l < n_labels; ++l) {
      const Index c = class_order[static_cast<std::size_t>(l)];
      sample.labels[c] = 1;
      const double jitter = rng.uniform(0.7, 1.3);
      for (const Peak& p : peaks[static_cast<std::size_t>(c)]) {
        const Index t_lo = std::max<Index>(0, static_cast<Index>(std::ceil(p.t_center - 3.0 * p.sigma_t)));
        const Index t_hi = std::min<Index>(spec.t_dim - 1, static_cast<Index>(std::floor(p.t_center + 3.0 * p.sigma_t)));
        const Index f_lo = std::max<Index>(0, static_cast<Index>(std::ceil(p.f_center - 3.0 * p.sigma_f)));
        const Index f_hi = std::min<Index>(spec.f_dim - 1, static_cast<Index>(std::floor(p.f_center + 3.0 * p.sigma_f)));
        for (Index ti = t_lo; ti <= t_hi; ++ti) {
          const double dt = (static_cast<double>(ti) - p.t_center) / p.sigma_t;
          for (Index fi = f_lo; fi <= f_hi; ++fi) {
            const double df = (static_cast<double>(fi) - p.f_center) / p.sigma_f;
            sample.intensities(ti, fi) +=
                jitter * p.amplitude * std::exp(-0.5 * (dt * dt + df * df));
          }
        }
      }
    }
    if (spec.noise_scale > 0.0) {
      for (Index ti = 0; ti < spec.t_dim; ++ti) {
        for (Index fi = 0; fi < spec.f_dim; ++fi) {
          sample.intensities(ti, fi) += spec.noise_scale * std::abs(rng.normal());
        }
      }
    }

    // Zero out the smallest entries until the sample hits the target count.
    // Each row's largest entry is kept, so the data stays pattern-sparse
    // (sparse elements) without turning location-sparse (absent elements).
    const Index current_zeros = (sample.intensities.array().abs() < kZeroThreshold).count();
    if (current_zeros < target_zeros) {
      std::vector<std::pair<double, Index>> order;
      order.reserve(static_cast<std::size_t>(total - current_zeros));
      for (Index ti = 0; ti < spec.t_dim; ++ti) {
        Index argmax = 0;
        sample.intensities.row(ti).maxCoeff(&argmax);
        for (Index fi = 0; fi < spec.f_dim; ++fi) {
          const double v = sample.intensities(ti, fi);
          if (fi != argmax && std::abs(v) >= kZeroThreshold) {
            order.emplace_back(v, ti + fi * spec.t_dim);  // column-major flat index
          }
        }
      }
      const Index to_zero = target_zeros - current_zeros;
      if (static_cast<std::size_t>(to_zero) > order.size()) {
        throw std::invalid_argument(
            "generate_synthetic: unattainable sparsity target " +
            std::to_string(spec.target_sparsity) + " (at most " +
            std::to_string(order.size() + current_zeros) + " of " +
            std::to_string(total) + " entries can be zero)");
      }
      // pairs are distinct (index breaks value ties), so the zeroed set is
      // uniquely determined and deterministic
      std::nth_element(order.begin(), order.begin() + to_zero, order.end());
      double* mut = sample.intensities.data();
      for (Index k = 0; k < to_zero; ++k) mut[order[static_cast<std::size_t>(k)].second] = 0.0;
    }

    char id[16];
    std::snprintf(id, sizeof(id), "s%04lld", static_cast<long long>(i));
    sample.sample_id = id;
    out.samples.push_back(std::move(sample));
  }

  Batch all;
  all.reserve(out.samples.size());
  for (const SpectrumSample& s : out.samples) all.push_back(s.intensities);
  const double measured = sparsity_ratio(all);
  if (std::abs(measured - spec.target_sparsity) > kSparsitySlack) {
    throw std::invalid_argument(
        "generate_synthetic: unattainable sparsity target " +
        std::to_string(spec.target_sparsity) + " (measured " + std::to_string(measured) +
        "); peaks cover too much or too little of the grid");
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("train_test_split: test_fraction must be in (0, 1)");
  }
  if (d.n_samples() < 2) {
    throw std::invalid_argument("train_test_split: need at least 2 samples");
  }

  const Index n = d.n_samples();
  Index n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<Index>(n_test, 1, n - 1);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(mix_seed(seed, kStreamSplit));
  rng.shuffle(order);

  std::vector<bool> in_test(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n_test; ++i) in_test[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  Dataset train, test;
  train.t_dim = test.t_dim = d.t_dim;
  train.f_dim = test.f_dim = d.f_dim;
  train.class_names = test.class_names = d.class_names;
  for (Index i = 0; i < n; ++i) {
    (in_test[static_cast<std::size_t>(i)] ? test : train)
        .samples.push_back(d.samples[static_cast<std::size_t>(i)]);
  }
  return {std::move(train), std::move(test)};
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  if (d.n_samples() == 0) throw std::invalid_argument("save_dataset: empty dataset");
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["t_dim"] = d.t_dim;
  manifest["f_dim"] = d.f_dim;
  manifest["class_names"] = d.class_names;
  json samples = json::array();
  for (const SpectrumSample& s : d.samples) {
    if (s.intensities.rows() != d.t_dim || s.intensities.cols() != d.f_dim) {
      throw std::invalid_argument("save_dataset: sample '" + s.sample_id +
                                  "' shape mismatch");
    }
    if (s.labels.size() != d.n_classes()) {
      throw std::invalid_argument("save_dataset: sample '" + s.sample_id +
                                  "' label length mismatch");
    }
    json entry;
    entry["id"] = s.sample_id;
    entry["file"] = s.sample_id + ".gcms";
    entry["labels"] = std::vector<int>(s.labels.data(), s.labels.data() + s.labels.size());
    samples.push_back(entry);

    const std::filesystem::path file = dir / (s.sample_id + ".gcms");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_dataset: cannot open " + file.string());
    out.write(kSampleMagic, 4);
    write_u32le(out, kSampleFormatVersion);
    write_u32le(out, static_cast<std::uint32_t>(d.t_dim));
    write_u32le(out, static_cast<std::uint32_t>(d.f_dim));
    for (Index t = 0; t < d.t_dim; ++t) {
      for (Index f = 0; f < d.f_dim; ++f) write_f64le(out, s.intensities(t, f));
    }
    if (!out) throw DataError("save_dataset: write failed for " + file.string());
  }
  manifest["samples"] = samples;

  std::ofstream mf(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw DataError("save_dataset: cannot open " + (dir / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw DataError("load_dataset: cannot open " + manifest_path.string());
  const std::string text((std::istreambuf_iterator<char>(mf)),
                         std::istreambuf_iterator<char>());

  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("load_dataset: " + manifest_path.string() + ":" +
                    std::to_string(line_of_byte(text, e.byte)) + ": " + e.what());
  }

  Dataset d;
  try {
    d.t_dim = manifest.at("t_dim").get<Index>();
    d.f_dim = manifest.at("f_dim").get<Index>();
    d.class_names = manifest.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("load_dataset: " + manifest_path.string() + ": bad manifest: " + e.what());
  }
  if (d.t_dim < 1 || d.f_dim < 1 || d.class_names.empty()) {
    throw DataError("load_dataset: " + manifest_path.string() +
                    ": t_dim, f_dim and class_names must be non-empty");
  }

  if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw DataError("load_dataset: " + manifest_path.string() + ": missing samples array");
  }
  for (const json& entry : manifest["samples"]) {
    SpectrumSample s;
    std::string file;
    try {
      s.sample_id = entry.at("id").get<std::string>();
      file = entry.at("file").get<std::string>();
      const auto labels = entry.at("labels").get<std::vector<int>>();
      s.labels.resize(static_cast<Index>(labels.size()));
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] != 0 && labels[k] != 1) {
          throw DataError("load_dataset: sample '" + s.sample_id + "': non-binary label");
        }
        s.labels[static_cast<Index>(k)] = labels[k];
      }
    } catch (const json::exception& e) {
      throw DataError("load_dataset: " + manifest_path.string() + ": bad sample entry: " +
                      e.what());
    }
    if (s.labels.size() != d.n_classes()) {
      throw DataError("load_dataset: sample '" + s.sample_id +
                      "': label length does not match class_names");
    }

    const std::filesystem::path sample_path = dir / file;
    std::ifstream in(sample_path, std::ios::binary);
    if (!in) throw DataError("load_dataset: missing sample file " + sample_path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSampleMagic, 4) != 0) {
      throw DataError("load_dataset: " + sample_path.string() + ": bad magic");
    }
    const std::uint32_t version = read_u32le(in, sample_path.string());
    if (version != kSampleFormatVersion) {
      throw DataError("load_dataset: " + sample_path.string() + ": unsupported version " +
                      std::to_string(version));
    }
    const std::uint32_t t = read_u32le(in, sample_path.string());
    const std::uint32_t f = read_u32le(in, sample_path.string());
    if (t != static_cast<std::uint32_t>(d.t_dim) ||
        f != static_cast<std::uint32_t>(d.f_dim)) {
      throw DataError("load_dataset: " + sample_path.string() + ": shape " +
                      std::to_string(t) + "x" + std::to_string(f) +
                      " does not match manifest " + std::to_string(d.t_dim) + "x" +
                      std::to_string(d.f_dim));
    }
    s.intensities.resize(d.t_dim, d.f_dim);
    for (Index ti = 0; ti < d.t_dim; ++ti) {
      for (Index fi = 0; fi < d.f_dim; ++fi) {
        const double v = read_f64le(in, sample_path.string());
        if (!std::isfinite(v) || v < 0.0) {
          throw DataError("load_dataset: " + sample_path.string() +
                          ": negative or non-finite intensity");
        }
        s.intensities(ti, fi) = v;
      }
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace bpl
