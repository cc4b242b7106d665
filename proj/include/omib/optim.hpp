#pragma once

#include <cstdint>
#include <vector>

#include "omib/tensor.hpp"

namespace omib {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Bias-corrected Adam over a fixed parameter list. Moment buffers are
/// allocated to match each parameter at construction.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Applies one update from the current gradients. Throws GraphError if a
  /// parameter has no gradient.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
};

}  // namespace omib
