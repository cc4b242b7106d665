#include "omib/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "omib/rng.hpp"

namespace omib {

double gradient_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                      const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = loss_fn();
    for (Tensor& p : params) p.zero_grad();
    tape.backward(loss);
    for (Tensor& p : params) {
      if (p.has_grad()) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  }

  auto evaluate = [&] {
    NoGradGuard no_grad;
    return loss_fn().item();
  };
  const double base = evaluate();
  if (evaluate() != base) {
    throw std::invalid_argument(
        "gradient_check: loss function is not deterministic; freeze its stochastic inputs");
  }

  Rng rng(options.seed);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    std::span<double> values = p.mutable_values();
    std::vector<std::size_t> coords;
    if (options.coords_per_param == 0 || options.coords_per_param >= values.size()) {
      coords.resize(values.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < options.coords_per_param; ++i) {
        coords.push_back(rng.below(values.size()));
      }
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      const double h = options.step;
      auto at = [&](double offset) {
        values[i] = saved + offset;
        return evaluate();
      };
      const double p1 = at(h), m1 = at(-h), p2 = at(2.0 * h), m2 = at(-2.0 * h);
      values[i] = saved;
      const double numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace omib
