#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "omib/tensor.hpp"

namespace omib {

struct GradCheckOptions {
  double step = 1e-3;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t coords_per_param = 16;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of the scalar `loss_fn` against a
/// five-point central difference and returns the largest
///   |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
/// over the sampled coordinates. `loss_fn` must be deterministic (any noise
/// frozen); a function whose value changes between identical calls raises
/// std::invalid_argument.
double gradient_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                      const GradCheckOptions& options = {});

}  // namespace omib
