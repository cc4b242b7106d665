#include "omib/mine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "omib/batching.hpp"
#include "omib/optim.hpp"

namespace omib {
namespace {

constexpr double kMiCeilingGap = 1e-9;

void check_pairs(const Matrix& x, const Matrix& z) {
  if (x.rows != z.rows) {
    throw std::invalid_argument("mine: x has " + std::to_string(x.rows) + " rows but z has " +
                                std::to_string(z.rows));
  }
  if (x.rows < 2) throw std::invalid_argument("mine: needs at least 2 samples");
}

double objective(const std::pair<Tensor, Tensor>& t) {
  return mean_all(t.first).item() - log_mean_exp(t.second.values());
}

}  // namespace

void MineConfig::validate() const {
  if (hidden == 0 || epochs == 0 || batch_size == 0 || estimate_batches == 0) {
    throw std::invalid_argument("mine: hidden, epochs, batch size and estimate batches must be positive");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("mine: lr must be positive");
}

std::string MineConfig::describe() const {
  std::ostringstream out;
  out << "hidden=" << hidden << ";epochs=" << epochs << ";batch=" << batch_size << ";lr=" << lr
      << ";seed=" << seed << ";estimate_batches=" << estimate_batches;
  return out.str();
}

std::string MineConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(describe())));
  return buf;
}

MineModel::MineModel(std::size_t x_width, std::size_t z_width, std::size_t hidden, Rng& rng)
    : x_proj_(x_width, hidden, rng),
      z_weight_(Tensor::zeros({z_width, hidden}, true)),
      out_(hidden, 1, rng) {
  // Same fan-in scale as a single layer over [x; z].
  const double bound = 1.0 / std::sqrt(static_cast<double>(x_width + z_width));
  for (double& w : x_proj_.weight().mutable_values()) w = rng.uniform(-bound, bound);
  for (double& w : z_weight_.mutable_values()) w = rng.uniform(-bound, bound);
}

std::pair<Tensor, Tensor> MineModel::scores(const Tensor& x, const Tensor& z,
                                            std::span<const std::size_t> perm) const {
  Tensor hx = x_proj_(x);
  Tensor hz = matmul(z, z_weight_);
  Tensor joint = out_(relu(add(hx, hz)));
  Tensor marginal = out_(relu(add(hx, gather_rows(hz, perm))));
  return {joint, marginal};
}

std::vector<Tensor> MineModel::parameters() const {
  return {x_proj_.weight(), x_proj_.bias(), z_weight_, out_.weight(), out_.bias()};
}

Tensor log_mean_exp(const Tensor& t) {
  std::span<const double> v = t.values();
  const double shift = *std::max_element(v.begin(), v.end());
  return add_scalar(log(mean_all(exp(add_scalar(t, -shift)))), shift);
}

double log_mean_exp(std::span<const double> t) {
  if (t.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  const double shift = *std::max_element(t.begin(), t.end());
  double acc = 0.0;
  for (double v : t) acc += std::exp(v - shift);
  return std::log(acc / static_cast<double>(t.size())) + shift;
}

MineModel mine_train(const Matrix& x, const Matrix& z, const MineConfig& config) {
  config.validate();
  check_pairs(x, z);
  Rng init_rng(derive_seed(config.seed, "mine-init"));
  MineModel model(x.cols, z.cols, config.hidden, init_rng);
  Adam opt(model.parameters(), AdamConfig{.lr = config.lr});
  Rng order_rng(derive_seed(config.seed, "mine-order"));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = order_rng.permutation(x.rows);
    double total = 0.0;
    std::size_t used = 0;
    for (std::span<const std::size_t> batch : batches_of(order, config.batch_size)) {
      if (batch.size() < 2) continue;
      const std::vector<std::size_t> shuffle = order_rng.permutation(batch.size());
      Tape tape;
      auto t = model.scores(gather_batch(x, batch), gather_batch(z, batch), shuffle);
      Tensor value = sub(mean_all(t.first), log_mean_exp(t.second));
      tape.backward(scale(value, -1.0));
      opt.step();
      opt.zero_grad();
      total += value.item();
      ++used;
    }
    model.history.push_back(total / static_cast<double>(std::max<std::size_t>(used, 1)));
  }
  return model;
}

double mine_estimate(const MineModel& model, const Matrix& x, const Matrix& z,
                     const MineConfig& config) {
  config.validate();
  check_pairs(x, z);
  if (x.cols != model.x_width() || z.cols != model.z_width()) {
    throw std::invalid_argument("mine_estimate: data widths do not match the trained model");
  }
  NoGradGuard no_grad;
  Rng rng(derive_seed(config.seed, "mine-estimate"));
  const std::size_t batch = std::min(config.batch_size, x.rows);
  double total = 0.0;
  for (std::size_t b = 0; b < config.estimate_batches; ++b) {
    std::vector<std::size_t> rows = rng.permutation(x.rows);
    rows.resize(batch);
    const std::vector<std::size_t> shuffle = rng.permutation(batch);
    total += objective(model.scores(gather_batch(x, rows), gather_batch(z, rows), shuffle));
  }
  return total / static_cast<double>(config.estimate_batches);
}

double estimate_mi(const Matrix& x, const Matrix& z, const MineConfig& config) {
  return mine_estimate(mine_train(x, z, config), x, z, config);
}

double estimate_entropy(const Matrix& x, const MineConfig& config) { return estimate_mi(x, x, config); }

double analytic_gaussian_mi(double rho, std::size_t d) {
  if (!(std::abs(rho) < 1.0)) {
    throw std::invalid_argument("analytic_gaussian_mi: |rho| must be < 1, got " + std::to_string(rho));
  }
  return -0.5 * static_cast<double>(d) * std::log1p(-rho * rho);
}

BetaBounds compute_beta_bounds(std::span<const double> entropy, std::span<const double> mi) {
  const std::size_t views = entropy.size();
  if (views != 2 && views != 3) {
    throw std::invalid_argument("beta bounds: need 2 or 3 views, got " + std::to_string(views));
  }
  const std::size_t pairs = views == 2 ? 1 : 3;
  if (mi.size() != pairs) {
    throw std::invalid_argument("beta bounds: expected " + std::to_string(pairs) +
                                " pairwise MI values, got " + std::to_string(mi.size()));
  }
  auto raw_report = [&] {
    std::ostringstream out;
    out << "H=[";
    for (std::size_t i = 0; i < views; ++i) out << (i ? ", " : "") << entropy[i];
    out << "] I=[";
    for (std::size_t i = 0; i < pairs; ++i) out << (i ? ", " : "") << mi[i];
    out << "]";
    return out.str();
  };

  BetaBounds b;
  b.entropy.assign(entropy.begin(), entropy.end());
  const std::array<std::pair<std::size_t, std::size_t>, 3> order{{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t p = 0; p < pairs; ++p) {
    auto [i, j] = order[p];
    const double ceiling = entropy[i] + entropy[j] - kMiCeilingGap;
    const double clamped = std::clamp(mi[p], 0.0, std::max(ceiling, 0.0));
    b.mi.push_back({i, j, mi[p], clamped});
  }

  const double h12 = entropy[0] + entropy[1];
  const double den_l = 3.0 * h12;
  const double den_u = 3.0 * (h12 - b.mi[0].clamped);
  if (!(den_l > 0.0) || !(den_u > 0.0)) {
    throw std::invalid_argument("beta bounds: nonpositive denominator from " + raw_report());
  }
  b.m_l = 1.0 / den_l;
  b.m_u = 1.0 / den_u;
  if (views == 3) {
    const double h = entropy[0] + entropy[1] + entropy[2];
    const double i_sum = b.mi[0].clamped + b.mi[1].clamped + b.mi[2].clamped;
    const double den_l2 = 5.0 * h;
    const double den_u2 = 5.0 * (h - (2.0 / 3.0) * i_sum);
    if (!(den_l2 > 0.0) || !(den_u2 > 0.0)) {
      throw std::invalid_argument("beta bounds: nonpositive denominator from " + raw_report());
    }
    b.m_l2 = 1.0 / den_l2;
    b.m_u2 = 1.0 / den_u2;
  }
  return b;
}

BetaBounds estimate_beta_bounds(std::span<const Matrix> views, const MineConfig& config) {
  if (views.size() != 2 && views.size() != 3) {
    throw std::invalid_argument("beta bounds: need 2 or 3 views, got " + std::to_string(views.size()));
  }
  std::vector<double> entropy;
  for (std::size_t i = 0; i < views.size(); ++i) {
    MineConfig c = config;
    c.seed = derive_seed(config.seed, "entropy-" + std::to_string(i));
    entropy.push_back(estimate_entropy(views[i], c));
  }
  std::vector<double> mi;
  const std::array<std::pair<std::size_t, std::size_t>, 3> order{{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t p = 0; p < (views.size() == 2 ? 1u : 3u); ++p) {
    auto [i, j] = order[p];
    MineConfig c = config;
    c.seed = derive_seed(config.seed, "mi-" + std::to_string(i) + std::to_string(j));
    mi.push_back(estimate_mi(views[i], views[j], c));
  }
  BetaBounds b = compute_beta_bounds(entropy, mi);
  b.mine_hash = config.hash();
  return b;
}

}  // namespace omib
