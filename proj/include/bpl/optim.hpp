#pragma once

#include <string>
#include <vector>

#include "bpl/types.hpp"

namespace bpl {

// Half-cosine decay from lr_max at step 0 to lr_min at total_steps.
struct CosineSchedule {
  double lr_max = 1e-3;
  double lr_min = 0.0;
  long total_steps = 1;
};

/// Learning rate at step s; steps past total_steps hold at lr_min.
/// Endpoints are exact: lr_at_step(0) == lr_max, lr_at_step(total) == lr_min.
double lr_at_step(long s, const CosineSchedule& sched);

// A named view into one parameter block and its gradient.
struct ParamBlock {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  Index size = 0;
};

// Adam accumulator state. Moment blocks are allocated on first use and keyed
// by the order of the blocks passed to adam_step, which must stay stable
// across calls.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  double base_lr = 1e-3;
  long step = 0;
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
};

/// One bias-corrected Adam update over all blocks:
///   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps_hat)
/// Throws NumericalError naming the block if a gradient is not finite.
void adam_step(const std::vector<ParamBlock>& blocks, AdamState& state, double lr);

}  // namespace bpl
