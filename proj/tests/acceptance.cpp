// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgeted criteria time themselves and fail when over budget.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bpl/basis.hpp"
#include "bpl/compare.hpp"
#include "bpl/data.hpp"
#include "bpl/errors.hpp"
#include "bpl/linalg.hpp"
#include "bpl/metrics.hpp"
#include "bpl/optim.hpp"
#include "bpl/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using bpl::BasisSet;
using bpl::Batch;
using bpl::Index;
using bpl::LabelMatrix;
using bpl::Matrix;
using bpl::Vector;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure{message};
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. analytic BPL gradients vs central finite differences
void criterion_gradient_correctness() {
  const auto start = Clock::now();
  double max_rel = 0.0;
  int instances = 0, clamped_rows = 0, unclamped_rows = 0;

  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    bpl::Rng rng(seed);
    const Index n = 2 + static_cast<Index>(rng.integer(3));
    const Index f = 2 + static_cast<Index>(rng.integer(4));
    const Index t = 1 + static_cast<Index>(rng.integer(3));

    BasisSet b;
    b.bases = oracles::random_matrix(n, f, seed * 5 + 1, 1.3);
    if (seed % 3 == 1) b.denominator = bpl::Denominator::kNormSquared;
    Batch x{oracles::random_matrix(t, f, seed * 5 + 2)};
    const Matrix gy = oracles::random_matrix(t, n, seed * 5 + 3);

    const Vector norms = bpl::row_pnorms(b.bases, b.norm_type);
    for (Index i = 0; i < n; ++i) (norms[i] > 1.0 ? clamped_rows : unclamped_rows)++;

    auto loss = [&]() {
      return (bpl::bpl_forward(x, b).coefficients[0].array() * gy.array()).sum();
    };
    const auto cache = bpl::bpl_forward(x, b);
    const auto grads = bpl::bpl_backward(Batch{gy}, cache);

    for (Index i = 0; i < n; ++i) {
      if (std::abs(norms[i] - 1.0) < 1e-3) continue;  // clamp kink
      for (Index j = 0; j < f; ++j) {
        const double fd = oracles::central_difference(loss, &b.bases(i, j), 1e-6);
        const double rel = std::abs(grads.grad_bases(i, j) - fd) /
                           std::max(1e-8, std::max(std::abs(fd),
                                                   std::abs(grads.grad_bases(i, j))));
        max_rel = std::max(max_rel, rel);
      }
    }
    for (Index r = 0; r < t; ++r) {
      for (Index j = 0; j < f; ++j) {
        const double fd = oracles::central_difference(loss, &x[0](r, j), 1e-6);
        const double rel = std::abs(grads.grad_x[0](r, j) - fd) /
                           std::max(1e-8, std::max(std::abs(fd),
                                                   std::abs(grads.grad_x[0](r, j))));
        max_rel = std::max(max_rel, rel);
      }
    }
    ++instances;
  }

  require(instances >= 100, "fewer than 100 instances");
  require(clamped_rows > 0 && unclamped_rows > 0, "row mix lacks a clamp branch");
  require(max_rel < 1e-4, "max relative error " + format_double(max_rel) + " >= 1e-4");
  const double elapsed = seconds_since(start);
  require(elapsed < 10.0, "took " + format_double(elapsed) + " s (budget 10 s)");
}

// ---------------------------------------------------------------------------
// 2. clamp invariant and idempotence, 1000 random basis sets
void criterion_clamp_invariant() {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    bpl::Rng rng(seed * 7 + 3);
    const Index n = 1 + static_cast<Index>(rng.integer(8));
    const Index f = 1 + static_cast<Index>(rng.integer(12));
    BasisSet b;
    b.bases = oracles::random_matrix(n, f, seed + 50000, rng.uniform(0.1, 3.0));
    if (seed % 4 == 1) b.norm_type = 1.0;
    if (seed % 4 == 2) b.norm_type = 3.0;

    const BasisSet once = bpl::clamp_bases(b);
    const Vector norms = bpl::row_pnorms(once.bases, once.norm_type);
    require(norms.maxCoeff() <= 1.0 + 1e-12,
            "row norm " + format_double(norms.maxCoeff()) + " above the ball");
    const BasisSet twice = bpl::clamp_bases(once);
    require(once.bases == twice.bases, "clamp is not bit-for-bit idempotent");
  }
}

// ---------------------------------------------------------------------------
// 3. sparsity annihilation on the default synthetic benchmark
void criterion_sparsity_annihilation() {
  bpl::SyntheticSpec spec;  // defaults: 96 samples, 128 x 48, sparsity 0.80
  const bpl::Dataset data = bpl::generate_synthetic(spec);
  Batch x;
  for (const auto& s : data.samples) x.push_back(s.intensities);
  const double before = bpl::sparsity_ratio(x);
  require(std::abs(before - 0.80) <= 0.02,
          "input sparsity " + format_double(before) + " not within 0.80 +- 0.02");

  bpl::InitSpec init;
  init.method = bpl::InitMethod::kVonMises;
  init.seed = 1;
  const BasisSet bases = bpl::init_von_mises(init, 48, 48);
  const double after = bpl::sparsity_ratio(bpl::bpl_forward(x, bases).coefficients);
  require(after < 0.01, "projected sparsity " + format_double(after) + " >= 0.01");

  // identity front leaves the ratio untouched
  bpl::ExperimentConfig config;
  config.front = "none";
  config.steps = 1;
  const bpl::MetricsReport report = [&]() {
    bpl::TrainState state = bpl::init_train_state(config, data);
    return bpl::evaluate_model(state.model, data, 0.5, 16);
  }();
  require(report.sparsity_before == report.sparsity_after,
          "identity front changed the sparsity ratio");
}

// ---------------------------------------------------------------------------
// 4. exact zero for exactly orthogonal basis/element pairs
void criterion_orthogonality_zero() {
  {
    Vector x(2), basis(2);
    x << 1.0, 0.0;
    basis << 0.0, 1.0;
    BasisSet b;
    b.bases = basis.transpose();
    const auto out = bpl::bpl_forward(Batch{x.transpose()}, b);
    require(out.coefficients[0](0, 0) == 0.0, "e1 . e2 coefficient not exactly zero");
  }
  // disjoint-support pairs stay exactly zero regardless of the values
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    bpl::Rng rng(seed);
    const Index f = 6 + static_cast<Index>(rng.integer(10));
    Vector x = Vector::Zero(f);
    Vector basis = Vector::Zero(f);
    for (Index j = 0; j < f; ++j) {
      const double v = rng.normal() * 2.0;
      if (j % 2 == 0) {
        x[j] = v;
      } else {
        basis[j] = v;
      }
    }
    BasisSet b;
    b.bases = basis.transpose();
    if (seed % 2 == 1) b.denominator = bpl::Denominator::kNormSquared;
    const auto out = bpl::bpl_forward(Batch{x.transpose()}, b);
    require(out.coefficients[0](0, 0) == 0.0, "disjoint-support coefficient not zero");
  }
}

// ---------------------------------------------------------------------------
// 5. svd vs gram-matrix eigen oracle; nmf monotone and non-negative
void criterion_factorization_oracles() {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    bpl::Rng shape_rng(seed);
    const Index rows = 2 + static_cast<Index>(shape_rng.integer(19));
    const Index cols = 2 + static_cast<Index>(shape_rng.integer(19));
    const Matrix m = oracles::random_matrix(rows, cols, seed * 11 + 2);
    const Index k = std::min(rows, cols);
    const bpl::SvdResult svd = bpl::svd_top_k(m, k);

    Vector eigenvalues;
    Matrix eigenvectors;
    oracles::jacobi_eigen_symmetric(m.transpose() * m, eigenvalues, eigenvectors);
    for (Index i = 0; i < k; ++i) {
      const double oracle = std::sqrt(std::max(0.0, eigenvalues[i]));
      require(std::abs(svd.singular_values[i] - oracle) < 1e-8,
              "singular value " + std::to_string(i) + " off by " +
                  format_double(std::abs(svd.singular_values[i] - oracle)));
    }
  }
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Matrix m = oracles::random_matrix(8, 6, seed + 40).cwiseAbs();
    const bpl::NmfResult nmf = bpl::nmf_factorize(m, 3, 200, seed);
    for (std::size_t i = 1; i < nmf.objective_history.size(); ++i) {
      require(nmf.objective_history[i] <= nmf.objective_history[i - 1] + 1e-10,
              "nmf objective increased at iteration " + std::to_string(i));
    }
    require(nmf.w.minCoeff() >= 0.0 && nmf.h.minCoeff() >= 0.0,
            "nmf factors went negative");
  }
}

// ---------------------------------------------------------------------------
// 6. initializer statistics and capacity errors
void criterion_initializer_statistics() {
  bpl::InitSpec spec;
  spec.method = bpl::InitMethod::kVonMises;
  spec.concentration = M_PI;
  spec.seed = 77;
  const Index f = 16;
  const BasisSet b = bpl::init_von_mises(spec, 2000, f);
  const Vector center = Vector::Constant(f, 1.0 / std::sqrt(static_cast<double>(f)));
  double mean_cos = 0.0;
  for (Index i = 0; i < b.n_bases(); ++i) {
    require(std::abs(b.bases.row(i).norm() - 1.0) < 1e-12,
            "sampled basis is not unit norm");
    mean_cos += b.bases.row(i).dot(center.transpose());
  }
  mean_cos /= static_cast<double>(b.n_bases());
  const double oracle = oracles::von_mises_mean_resultant(M_PI);
  require(std::abs(mean_cos - oracle) < 0.03,
          "mean resultant " + format_double(mean_cos) + " vs oracle " +
              format_double(oracle));

  bool threw = false;
  try {
    bpl::InitSpec cap;
    cap.method = bpl::InitMethod::kSvd;
    cap.data = Matrix::Ones(800, 490).eval();
    bpl::init_from_factorization(cap, 768, 490);
  } catch (const bpl::CapacityError&) {
    threw = true;
  }
  require(threw, "svd capacity error not raised for 768 bases at F=490");

  threw = false;
  try {
    bpl::InitSpec cap;
    cap.method = bpl::InitMethod::kNmf;
    cap.data = Matrix::Ones(10, 8).eval();
    bpl::init_from_factorization(cap, 9, 8);
  } catch (const bpl::CapacityError&) {
    threw = true;
  }
  require(threw, "nmf capacity error not raised");
}

// ---------------------------------------------------------------------------
// 7. optimizer: two-step trace, schedule endpoints, quadratic convergence
void criterion_optimizer() {
  {
    double p = 1.0, g = 0.0;
    bpl::AdamState state;
    const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double hp = 1.0, hm = 0.0, hv = 0.0;
    for (int step = 1; step <= 2; ++step) {
      g = 2.0 * (p - 3.0);
      bpl::adam_step({{"p", &p, &g, 1}}, state, lr);
      const double hg = 2.0 * (hp - 3.0);
      hm = b1 * hm + (1.0 - b1) * hg;
      hv = b2 * hv + (1.0 - b2) * hg * hg;
      hp -= lr * (hm / (1.0 - std::pow(b1, step))) /
            (std::sqrt(hv / (1.0 - std::pow(b2, step))) + eps);
      require(std::abs(p - hp) <= 1e-12,
              "adam step " + std::to_string(step) + " deviates by " +
                  format_double(std::abs(p - hp)));
    }
  }
  {
    const bpl::CosineSchedule sched{2.5e-3, 1e-5, 777};
    require(bpl::lr_at_step(0, sched) == 2.5e-3, "lr(0) != lr_max");
    require(bpl::lr_at_step(777, sched) == 1e-5, "lr(total) != lr_min");
  }
  {
    double p = 0.0, g = 0.0;
    bpl::AdamState state;
    long steps = 0;
    for (; steps < 5000 && std::abs(p - 3.0) >= 1e-3; ++steps) {
      g = 2.0 * (p - 3.0);
      bpl::adam_step({{"p", &p, &g, 1}}, state, 0.01);
    }
    require(std::abs(p - 3.0) < 1e-3,
            "quadratic not minimized in 5000 steps, p = " + format_double(p));
  }
}

// ---------------------------------------------------------------------------
// 8. micro/macro F1 against brute-force enumeration
void criterion_metric_oracle() {
  for (unsigned pm = 0; pm < 64; ++pm) {
    for (unsigned tm = 0; tm < 64; ++tm) {
      LabelMatrix pred(3, 2), truth(3, 2);
      for (int bit = 0; bit < 6; ++bit) {
        pred(bit / 2, bit % 2) = (pm >> bit) & 1;
        truth(bit / 2, bit % 2) = (tm >> bit) & 1;
      }
      long tp_all = 0, fp_all = 0, fn_all = 0;
      double macro_sum = 0.0;
      for (Index j = 0; j < 2; ++j) {
        long tp = 0, fp = 0, fn = 0;
        for (Index i = 0; i < 3; ++i) {
          tp += (pred(i, j) == 1 && truth(i, j) == 1);
          fp += (pred(i, j) == 1 && truth(i, j) == 0);
          fn += (pred(i, j) == 0 && truth(i, j) == 1);
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn;
        const double den = 2.0 * tp + fp + fn;
        macro_sum += den == 0.0 ? 0.0 : 2.0 * tp / den;
      }
      const double den = 2.0 * tp_all + fp_all + fn_all;
      const double micro = den == 0.0 ? 0.0 : 2.0 * tp_all / den;
      const double macro = macro_sum / 2.0;
      require(std::abs(bpl::multilabel_f1(pred, truth, bpl::F1Mode::kMicro) - micro) <=
                  1e-12,
              "micro F1 mismatch at case " + std::to_string(pm * 64 + tm));
      require(std::abs(bpl::multilabel_f1(pred, truth, bpl::F1Mode::kMacro) - macro) <=
                  1e-12,
              "macro F1 mismatch at case " + std::to_string(pm * 64 + tm));
    }
  }
}

// ---------------------------------------------------------------------------
// 9. a 16-sample training set is memorized within 2000 steps
void criterion_overfit() {
  const auto start = Clock::now();
  bpl::ExperimentConfig config;
  config.synthetic.n_samples = 16;
  config.test_fraction = 0.0;
  config.steps = 2000;
  config.eval_interval = 50;

  const bpl::Dataset train = bpl::resolve_dataset(config);
  bpl::TrainState state = bpl::init_train_state(config, train);

  // advance in eval_interval chunks so the run can stop at the first F1 of 1;
  // the schedule always spans the full 2000 steps
  double f1 = 0.0;
  while (state.step < config.steps) {
    bpl::train_loop(state, train, nullptr, state.step + config.eval_interval);
    f1 = bpl::evaluate_model(state.model, train, config.threshold, config.batch_size)
             .micro_f1;
    if (f1 == 1.0) break;
  }
  require(f1 == 1.0, "train micro-F1 " + format_double(f1) + " after " +
                         std::to_string(state.step) + " steps");
  const double elapsed = seconds_since(start);
  require(elapsed < 300.0, "took " + format_double(elapsed) + " s (budget 300 s)");
}

// ---------------------------------------------------------------------------
// 10. directional benchmark: plain CNN vs basis projection at N=F and N>F
void criterion_directional_benchmark() {
  const auto start = Clock::now();
  auto held_out_f1 = [&](const std::string& front, Index n_bases, std::uint64_t seed) {
    bpl::ExperimentConfig config;  // defaults: 96 samples, 2000 steps
    config.front = front;
    config.n_bases = n_bases;
    config.initializer = "von_mises";
    config.seed = seed;
    const bpl::Dataset full = bpl::resolve_dataset(config);
    const auto [train, test] = bpl::resolve_split(config, full);
    bpl::TrainState state = bpl::init_train_state(config, train);
    bpl::train_loop(state, train, nullptr);
    return bpl::evaluate_model(state.model, test, config.threshold, config.batch_size)
        .micro_f1;
  };

  double plain = 0.0, bpl_nf = 0.0, bpl_wide = 0.0;
  for (const std::uint64_t seed : {0ull, 1ull, 2ull}) {
    plain += held_out_f1("none", 48, seed);
    bpl_nf += held_out_f1("bpl", 48, seed);
    bpl_wide += held_out_f1("bpl", 72, seed);
  }
  plain /= 3.0;
  bpl_nf /= 3.0;
  bpl_wide /= 3.0;

  std::fprintf(stderr,
               "      [benchmark] plain %.4f | bpl N=F %.4f | bpl N>F %.4f\n",
               plain, bpl_nf, bpl_wide);
  require(bpl_nf > plain + 0.02,
          "bpl(N=F) " + format_double(bpl_nf) + " not above plain " +
              format_double(plain) + " by 0.02");
  require(bpl_wide >= bpl_nf - 0.01,
          "bpl(N>F) " + format_double(bpl_wide) + " below bpl(N=F) " +
              format_double(bpl_nf) + " - 0.01");
  const double elapsed = seconds_since(start);
  require(elapsed < 1800.0, "took " + format_double(elapsed) + " s (budget 1800 s)");
}

// ---------------------------------------------------------------------------
// 11. determinism of reports, checkpoints and dataset files
void criterion_determinism_persistence() {
  bpl::ExperimentConfig config;
  config.synthetic.n_samples = 12;
  config.synthetic.t_dim = 16;
  config.synthetic.f_dim = 12;
  config.synthetic.n_classes = 3;
  config.n_bases = 12;
  config.width = 6;
  config.blocks = 2;
  config.steps = 30;
  config.batch_size = 4;
  config.eval_interval = 10;

  auto run_report = [&]() {
    const bpl::Dataset full = bpl::resolve_dataset(config);
    const auto [train, test] = bpl::resolve_split(config, full);
    bpl::TrainState state = bpl::init_train_state(config, train);
    bpl::train_loop(state, train, nullptr);
    const bpl::MetricsReport tm =
        bpl::evaluate_model(state.model, train, config.threshold, config.batch_size);
    const bpl::MetricsReport em =
        bpl::evaluate_model(state.model, test, config.threshold, config.batch_size);
    return bpl::train_report_json(state, tm, &em).dump();
  };
  require(run_report() == run_report(), "identical configs gave different reports");

  // save/resume reproduces the uninterrupted trajectory bit-for-bit
  const bpl::Dataset full = bpl::resolve_dataset(config);
  const auto [train, test] = bpl::resolve_split(config, full);
  bpl::TrainState straight = bpl::init_train_state(config, train);
  bpl::train_loop(straight, train, nullptr);

  bpl::TrainState partial = bpl::init_train_state(config, train);
  bpl::train_loop(partial, train, nullptr, /*stop_after_step=*/15);
  const fs::path dir = fs::temp_directory_path() / "bpl_acceptance";
  fs::create_directories(dir);
  bpl::save_checkpoint(partial, dir / "partial.bpl");
  bpl::TrainState resumed = bpl::load_checkpoint(dir / "partial.bpl");
  bpl::train_loop(resumed, train, nullptr);

  require(straight.history.loss == resumed.history.loss,
          "resumed loss history differs");
  const auto blocks_a = bpl::param_blocks(straight.model);
  const auto blocks_b = bpl::param_blocks(resumed.model);
  for (std::size_t i = 0; i < blocks_a.size(); ++i) {
    for (Index k = 0; k < blocks_a[i].size; ++k) {
      require(blocks_a[i].value[k] == blocks_b[i].value[k],
              "resumed parameters differ in block " + blocks_a[i].name);
    }
  }

  // dataset round-trip: save -> load -> save gives identical bytes
  const bpl::Dataset data = bpl::generate_synthetic(config.synthetic);
  bpl::save_dataset(data, dir / "ds_a");
  bpl::save_dataset(bpl::load_dataset(dir / "ds_a"), dir / "ds_b");
  for (const auto& entry : fs::directory_iterator(dir / "ds_a")) {
    const auto name = entry.path().filename();
    std::ifstream a(entry.path(), std::ios::binary);
    std::ifstream b(dir / "ds_b" / name, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                              std::istreambuf_iterator<char>());
    require(bytes_a == bytes_b, "dataset round-trip changed " + name.string());
  }

  // checkpoint round-trip: save -> load -> save gives identical bytes
  bpl::save_checkpoint(straight, dir / "ckpt_a.bpl");
  bpl::save_checkpoint(bpl::load_checkpoint(dir / "ckpt_a.bpl"), dir / "ckpt_b.bpl");
  std::ifstream a(dir / "ckpt_a.bpl", std::ios::binary);
  std::ifstream b(dir / "ckpt_b.bpl", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                            std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                            std::istreambuf_iterator<char>());
  require(bytes_a == bytes_b, "checkpoint round-trip changed the file");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness (finite differences, <1e-4, <10s)",
       criterion_gradient_correctness},
      {2, "clamp invariant and idempotence (1000 basis sets)",
       criterion_clamp_invariant},
      {3, "sparsity annihilation (0.80 -> <0.01; identity unchanged)",
       criterion_sparsity_annihilation},
      {4, "orthogonal pairs give exactly zero", criterion_orthogonality_zero},
      {5, "factorization oracles (svd eigen-oracle, nmf monotone)",
       criterion_factorization_oracles},
      {6, "initializer statistics (bessel ratio, capacity errors)",
       criterion_initializer_statistics},
      {7, "optimizer (adam trace, schedule endpoints, quadratic)",
       criterion_optimizer},
      {8, "metric oracle (brute-force micro/macro F1)", criterion_metric_oracle},
      {9, "overfit: train micro-F1 = 1.0 on 16 samples (<2000 steps, <5min)",
       criterion_overfit},
      {10, "directional benchmark: bpl > plain by 0.02; N>F holds (<30min)",
       criterion_directional_benchmark},
      {11, "determinism and persistence (reports, resume, round-trips)",
       criterion_determinism_persistence},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = Clock::now();
    try {
      criterion.run();
      std::printf("PASS  criterion %2d: %s  (%.1fs)\n", criterion.id, criterion.name,
                  seconds_since(start));
    } catch (const Failure& failure) {
      std::printf("FAIL  criterion %2d: %s — %s\n", criterion.id, criterion.name,
                  failure.message.c_str());
      ++failures;
    } catch (const std::exception& e) {
      std::printf("FAIL  criterion %2d: %s — unexpected exception: %s\n", criterion.id,
                  criterion.name, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
