#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omib/nn.hpp"
#include "omib/synth.hpp"

namespace omib {

struct MineConfig {
  std::size_t hidden = 128;
  std::size_t epochs = 200;
  std::size_t batch_size = 2048;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t estimate_batches = 16;

  void validate() const;
  /// Canonical one-line description; `hash()` is its FNV-1a digest in hex.
  std::string describe() const;
  std::string hash() const;
};

/// Statistic network T(x, z) = w2 . relu(W1 [x; z] + b1) + b2, with W1 split
/// into its x and z column blocks so shuffled pairs reuse the projections.
class MineModel {
 public:
  MineModel(std::size_t x_width, std::size_t z_width, std::size_t hidden, Rng& rng);

  /// T on joint pairs (x_i, z_i) and on shuffled pairs (x_i, z_perm[i]).
  std::pair<Tensor, Tensor> scores(const Tensor& x, const Tensor& z,
                                   std::span<const std::size_t> perm) const;
  std::vector<Tensor> parameters() const;
  std::size_t x_width() const { return x_proj_.in_width(); }
  std::size_t z_width() const { return z_weight_.shape()[0]; }

  std::vector<double> history;  // training objective per epoch (nats)

 private:
  Linear x_proj_;
  Tensor z_weight_;
  Linear out_;
};

/// log(mean(exp(t))) with max shift.
Tensor log_mean_exp(const Tensor& t);
double log_mean_exp(std::span<const double> t);

/// Gradient ascent on E_joint[T] - log E_marginal[e^T], marginal pairs from
/// shuffling z rows within each batch.
MineModel mine_train(const Matrix& x, const Matrix& z, const MineConfig& config);
/// Objective averaged over `estimate_batches` freshly shuffled batches.
double mine_estimate(const MineModel& model, const Matrix& x, const Matrix& z,
                     const MineConfig& config);
/// Train then estimate.
double estimate_mi(const Matrix& x, const Matrix& z, const MineConfig& config);
/// Self-information I(X; X).
double estimate_entropy(const Matrix& x, const MineConfig& config);

/// Mutual information of jointly Gaussian vectors with d independent
/// coordinate pairs of correlation rho.
double analytic_gaussian_mi(double rho, std::size_t d);

struct PairMi {
  std::size_t i = 0;
  std::size_t j = 0;
  double raw = 0.0;
  double clamped = 0.0;
};

struct BetaBounds {
  std::vector<double> entropy;  // per modality, nats
  std::vector<PairMi> mi;       // i < j
  double m_l = 0.0;
  double m_u = 0.0;
  std::optional<double> m_l2;  // three modalities only
  std::optional<double> m_u2;
  std::string mine_hash;

  double lower() const { return m_l2.value_or(m_l); }
  double upper() const { return m_u2.value_or(m_u); }
  double midpoint() const { return 0.5 * (lower() + upper()); }
};

/// Pure bound arithmetic. `mi` lists I(v_i; v_j) for i < j in the order
/// (0,1) for two views and (0,1), (0,2), (1,2) for three. Negative MI is
/// clamped to 0 and MI above the entropy total to just below it. With three
/// views m_l/m_u still hold the bounds of the first two.
BetaBounds compute_beta_bounds(std::span<const double> entropy, std::span<const double> mi);

/// Runs MINE for every entropy and pairwise MI (each with its own derived
/// seed) and applies compute_beta_bounds.
BetaBounds estimate_beta_bounds(std::span<const Matrix> views, const MineConfig& config);

}  // namespace omib
