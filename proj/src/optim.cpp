#include "omib/optim.hpp"

#include <cmath>

#include "omib/simd/dispatch.hpp"

namespace omib {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const Tensor& p : params_) {
    first_moment_.emplace_back(p.numel(), 0.0);
    second_moment_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw GraphError("adam: parameter " + std::to_string(i) + " " +
                       shape_str(params_[i].shape()) + " has no gradient");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const simd::AdamCoeffs coeffs{config_.lr,
                                config_.beta1,
                                config_.beta2,
                                config_.eps,
                                config_.weight_decay,
                                1.0 - std::pow(config_.beta1, t),
                                1.0 - std::pow(config_.beta2, t)};
  const auto& adam = simd::kernels().adam;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    adam(p.numel(), p.mutable_values().data(), p.grad().data(), first_moment_[i].data(),
         second_moment_[i].data(), coeffs);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace omib
