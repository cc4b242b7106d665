#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "omib/ops.hpp"
#include "omib/rng.hpp"
#include "omib/tensor.hpp"

namespace omib {

enum class Activation { none, relu, leaky_relu, gelu, tanh };

Tensor activate(const Tensor& x, Activation act);
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

/// y = x W + b with W stored [in x out]. Weights are drawn uniformly from
/// [-1/sqrt(in), 1/sqrt(in)]; biases start at zero.
class Linear {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  std::vector<Tensor> parameters() const { return {weight_, bias_}; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_width() const { return weight_.shape()[0]; }
  std::size_t out_width() const { return weight_.shape()[1]; }

 private:
  Tensor weight_;
  Tensor bias_;
};

struct MlpConfig {
  /// widths[0] is the input width; each following entry adds one linear layer.
  std::vector<std::size_t> widths;
  Activation activation = Activation::gelu;
  Activation final_activation = Activation::none;

  void validate() const;
};

class Mlp {
 public:
  Mlp(MlpConfig config, Rng& rng);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;

  const MlpConfig& config() const { return config_; }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in_width() const { return config_.widths.front(); }
  std::size_t out_width() const { return config_.widths.back(); }

 private:
  MlpConfig config_;
  std::vector<Linear> layers_;
};

/// Mean and diagonal log-variance of a Gaussian posterior, each [batch x k].
struct VaeHeadOutput {
  Tensor mu;
  Tensor log_var;
};

/// Two-layer GELU trunk followed by separate linear heads for mu and log-variance.
class VaeHead {
 public:
  VaeHead(std::size_t in, std::size_t hidden, std::size_t latent, Rng& rng);

  VaeHeadOutput forward(const Tensor& z) const;
  std::vector<Tensor> parameters() const;

  Mlp& trunk() { return trunk_; }
  Linear& mu_head() { return mu_head_; }
  Linear& log_var_head() { return log_var_head_; }

 private:
  Mlp trunk_;
  Linear mu_head_;
  Linear log_var_head_;
};

/// zeta = mu + exp(0.5 log_var) * eps. `eps` carries no gradient.
Tensor reparameterize(const VaeHeadOutput& out, const Tensor& eps);

/// Single-head scaled dot-product attention across modality tokens: each
/// sample contributes one k-wide token per modality, tokens attend to each
/// other within the sample, the attended tokens are concatenated along
/// features and a final linear layer maps [M*k] back to k.
class CrossAttention {
 public:
  CrossAttention(std::size_t latent, std::size_t modalities, Rng& rng);

  Tensor forward(std::span<const Tensor> zetas) const;
  std::vector<Tensor> parameters() const;

  Tensor& w_query() { return w_query_; }
  Tensor& w_key() { return w_key_; }
  Tensor& w_value() { return w_value_; }
  Linear& output() { return output_; }
  std::size_t modalities() const { return modalities_; }

 private:
  std::size_t latent_;
  std::size_t modalities_;
  Tensor w_query_;
  Tensor w_key_;
  Tensor w_value_;
  Linear output_;
};

/// Per-sample KL[N(mu, diag exp(log_var)) || N(0, I)], rank-1 of length batch.
Tensor kl_diag_gauss_std(const VaeHeadOutput& out);

/// sum p ln(p/q); terms with p = 0 vanish and q is clamped at 1e-12.
double kl_categorical(std::span<const double> p, std::span<const double> q);

/// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace omib
