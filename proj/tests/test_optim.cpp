#include <doctest.h>

#include <cmath>

#include "omib/ops.hpp"
#include "omib/optim.hpp"

using namespace omib;

TEST_CASE("first Adam step moves by lr against the gradient") {
  Tensor p = Tensor::from({1}, {0.0}, true);
  Adam opt({p}, AdamConfig{.lr = 1e-4});
  {
    Tape tape;
    tape.backward(sum_all(scale(p, 3.0)));
  }
  opt.step();
  CHECK(p.values()[0] == doctest::Approx(-1e-4).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("a zero gradient leaves the parameter in place") {
  Tensor p = Tensor::from({2}, {0.25, -1.5}, true);
  Adam opt({p}, AdamConfig{.lr = 0.1});
  for (int i = 0; i < 5; ++i) {
    Tape tape;
    tape.backward(scale(sum_all(p), 0.0));
    opt.step();
    opt.zero_grad();
  }
  CHECK(p.values()[0] == 0.25);
  CHECK(p.values()[1] == -1.5);
}

TEST_CASE("100 Adam steps on p^2 approach the minimum") {
  Tensor p = Tensor::from({1}, {1.0}, true);
  Adam opt({p}, AdamConfig{.lr = 0.1});
  for (int i = 0; i < 100; ++i) {
    Tape tape;
    tape.backward(sum_all(square(p)));
    opt.step();
    opt.zero_grad();
  }
  CHECK(std::abs(p.values()[0]) < 0.1);
}

TEST_CASE("Adam matches a hand-rolled update over several steps") {
  Tensor p = Tensor::from({3}, {0.5, -0.2, 2.0}, true);
  AdamConfig cfg{.lr = 0.01, .beta1 = 0.8, .beta2 = 0.99, .eps = 1e-6, .weight_decay = 0.0};
  Adam opt({p}, cfg);
  std::vector<double> ref{0.5, -0.2, 2.0}, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 4; ++t) {
    {
      Tape tape;
      tape.backward(sum_all(mul(square(p), p)));
    }
    opt.step();
    opt.zero_grad();
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = 3.0 * ref[i] * ref[i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
      ref[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("stepping without a gradient is a graph error") {
  Tensor p = Tensor::from({1}, {1.0}, true);
  Adam opt({p}, AdamConfig{});
  CHECK_THROWS_AS(opt.step(), GraphError);
}
