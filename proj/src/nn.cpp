#include "omib/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace omib {

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::none:
      return x;
    case Activation::relu:
      return relu(x);
    case Activation::leaky_relu:
      return leaky_relu(x);
    case Activation::gelu:
      return gelu(x);
    case Activation::tanh:
      return omib::tanh(x);
  }
  return x;
}

Activation parse_activation(std::string_view name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "leaky-relu" || name == "leaky_relu") return Activation::leaky_relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::none:
      return "none";
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky-relu";
    case Activation::gelu:
      return "gelu";
    case Activation::tanh:
      return "tanh";
  }
  return "none";
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight_(Tensor::zeros({in, out}, true)), bias_(Tensor::zeros({out}, true)) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : weight_.mutable_values()) w = rng.uniform(-bound, bound);
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight_, bias_); }

void MlpConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("mlp: needs at least one linear layer");
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("mlp: layer widths must be positive");
  }
}

Mlp::Mlp(MlpConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i + 1 < config_.widths.size(); ++i) {
    layers_.emplace_back(config_.widths[i], config_.widths[i + 1], rng);
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != in_width()) {
    throw ShapeError("mlp: input " + shape_str(x.shape()) + " does not match input width " +
                     std::to_string(in_width()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    const bool last = i + 1 == layers_.size();
    h = activate(h, last ? config_.final_activation : config_.activation);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const Linear& l : layers_) {
    out.push_back(l.weight());
    out.push_back(l.bias());
  }
  return out;
}

VaeHead::VaeHead(std::size_t in, std::size_t hidden, std::size_t latent, Rng& rng)
    : trunk_(MlpConfig{{in, hidden, hidden}, Activation::gelu, Activation::gelu}, rng),
      mu_head_(hidden, latent, rng),
      log_var_head_(hidden, latent, rng) {}

VaeHeadOutput VaeHead::forward(const Tensor& z) const {
  Tensor h = trunk_.forward(z);
  return {mu_head_(h), log_var_head_(h)};
}

std::vector<Tensor> VaeHead::parameters() const {
  std::vector<Tensor> out = trunk_.parameters();
  for (const Linear* l : {&mu_head_, &log_var_head_}) {
    out.push_back(l->weight());
    out.push_back(l->bias());
  }
  return out;
}

Tensor reparameterize(const VaeHeadOutput& out, const Tensor& eps) {
  if (out.mu.shape() != out.log_var.shape() || eps.shape() != out.mu.shape()) {
    throw ShapeError("reparameterize: mu " + shape_str(out.mu.shape()) + ", log_var " +
                     shape_str(out.log_var.shape()) + ", eps " + shape_str(eps.shape()));
  }
  return add(out.mu, mul(exp(scale(out.log_var, 0.5)), eps.detach()));
}

CrossAttention::CrossAttention(std::size_t latent, std::size_t modalities, Rng& rng)
    : latent_(latent),
      modalities_(modalities),
      w_query_(Tensor::zeros({latent, latent}, true)),
      w_key_(Tensor::zeros({latent, latent}, true)),
      w_value_(Tensor::zeros({latent, latent}, true)),
      output_(modalities * latent, latent, rng) {
  if (modalities < 2) throw std::invalid_argument("cross-attention: needs at least 2 modalities");
  const double bound = 1.0 / std::sqrt(static_cast<double>(latent));
  for (Tensor* w : {&w_query_, &w_key_, &w_value_}) {
    for (double& v : w->mutable_values()) v = rng.uniform(-bound, bound);
  }
}

Tensor CrossAttention::forward(std::span<const Tensor> zetas) const {
  if (zetas.size() != modalities_) {
    throw ShapeError("cross-attention: expected " + std::to_string(modalities_) +
                     " modalities, got " + std::to_string(zetas.size()));
  }
  const Shape& s0 = zetas[0].shape();
  for (const Tensor& z : zetas) {
    if (z.shape() != s0 || z.rank() != 2 || s0[1] != latent_) {
      throw ShapeError("cross-attention: modality shapes must all be [n x " +
                       std::to_string(latent_) + "], got " + shape_str(z.shape()));
    }
  }
  const std::size_t m = zetas.size();
  std::vector<Tensor> q, k, v;
  for (const Tensor& z : zetas) {
    q.push_back(matmul(z, w_query_));
    k.push_back(matmul(z, w_key_));
    v.push_back(matmul(z, w_value_));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(latent_));
  std::vector<Tensor> attended;
  for (std::size_t t = 0; t < m; ++t) {
    std::vector<Tensor> scores;
    for (std::size_t u = 0; u < m; ++u) scores.push_back(sum(mul(q[t], k[u]), 1));
    Tensor weights = softmax(scale(concat(scores, 1), inv_sqrt), 1);
    Tensor mixed = mul(slice(weights, 1, 0, 1), v[0]);
    for (std::size_t u = 1; u < m; ++u) mixed = add(mixed, mul(slice(weights, 1, u, u + 1), v[u]));
    attended.push_back(mixed);
  }
  return output_(concat(attended, 1));
}

std::vector<Tensor> CrossAttention::parameters() const {
  return {w_query_, w_key_, w_value_, output_.weight(), output_.bias()};
}

Tensor kl_diag_gauss_std(const VaeHeadOutput& out) {
  if (out.mu.shape() != out.log_var.shape() || out.mu.rank() != 2) {
    throw ShapeError("kl_diag_gauss_std: mu " + shape_str(out.mu.shape()) + " vs log_var " +
                     shape_str(out.log_var.shape()));
  }
  Tensor terms = sub(add_scalar(add(square(out.mu), exp(out.log_var)), -1.0), out.log_var);
  Tensor per_sample = scale(sum(terms, 1), 0.5);
  return reshape(per_sample, {out.mu.shape()[0]});
}

double kl_categorical(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw std::invalid_argument("kl_categorical: support sizes differ (" +
                                std::to_string(p.size()) + " vs " + std::to_string(q.size()) +
                                ")");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double pi = p[i];
    const double qi = std::max(q[i], kLogClamp);
    total += pi * std::log(pi / qi);
  }
  return std::max(total, 0.0);
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || labels.size() != logits.shape()[0]) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_str(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t classes = logits.shape()[1];
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
  }
  return scale(mean_all(pick(log_softmax(logits, 1), labels)), -1.0);
}

}  // namespace omib
