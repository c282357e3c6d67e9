#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ecgdg/params.hpp"

namespace ecgdg::nn {

struct GradCheckResult {
  std::string op;
  double max_rel_error = 0.0;
  int samples = 0;
};

// Central finite differences against the reverse-mode gradient. `fwd` must
// rebuild the computation from the current parameter values and return the
// scalar loss; when run_backward is set it must also backpropagate into the
// set. Relative error uses max(|analytic|, |numeric|, 1e-3) as denominator so
// near-zero gradients are compared absolutely.
double max_rel_fd_error(ParamSet<double>& params,
                        const std::function<double(bool run_backward)>& fwd, int num_samples,
                        double step, uint64_t seed);

// Finite-difference suite over every differentiable op plus the tiny
// multi-scale model (12 leads, length 64, channels 8/16, 2 blocks, 4 taps).
// Sampled parameters per entry >= 20, step 1e-4, all in 64-bit.
std::vector<GradCheckResult> run_op_gradchecks(uint64_t seed);

}  // namespace ecgdg::nn
