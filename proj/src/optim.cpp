#include "bpl/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "bpl/errors.hpp"

namespace bpl {

double lr_at_step(long s, const CosineSchedule& sched) {
  if (sched.total_steps < 1) {
    throw std::invalid_argument("lr_at_step: total_steps must be >= 1");
  }
  if (sched.lr_min > sched.lr_max) {
    throw std::invalid_argument("lr_at_step: lr_min exceeds lr_max");
  }
  if (s < 0) throw std::invalid_argument("lr_at_step: negative step");
  if (s == 0) return sched.lr_max;
  if (s >= sched.total_steps) return sched.lr_min;
  const double frac = static_cast<double>(s) / static_cast<double>(sched.total_steps);
  return sched.lr_min + 0.5 * (sched.lr_max - sched.lr_min) * (1.0 + std::cos(M_PI * frac));
}

void adam_step(const std::vector<ParamBlock>& blocks, AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m.reserve(blocks.size());
    state.v.reserve(blocks.size());
    for (const ParamBlock& b : blocks) {
      state.m.push_back(Eigen::ArrayXd::Zero(b.size));
      state.v.push_back(Eigen::ArrayXd::Zero(b.size));
    }
  }
  if (state.m.size() != blocks.size()) {
    throw std::invalid_argument("adam_step: block count changed across calls");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ParamBlock& b = blocks[i];
    if (state.m[i].size() != b.size) {
      throw std::invalid_argument("adam_step: block '" + b.name + "' changed size");
    }
    Eigen::Map<Eigen::ArrayXd> p(b.value, b.size);
    Eigen::Map<const Eigen::ArrayXd> g(b.grad, b.size);
    if (!g.isFinite().all()) {
      throw NumericalError("adam_step: non-finite gradient in '" + b.name + "'");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.square();
    p -= lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + state.eps_hat);
  }
}

}  // namespace bpl
