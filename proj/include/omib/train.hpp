#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omib/mine.hpp"
#include "omib/nn.hpp"
#include "omib/optim.hpp"
#include "omib/synth.hpp"

namespace omib {

enum class TaskKind { classification, svdd, regression };

TaskKind parse_task(const std::string& name);
std::string task_name(TaskKind task);

struct BetaPolicy {
  enum class Kind { fixed, midpoint, sample };
  Kind kind = Kind::midpoint;
  double value = 0.0;  // fixed only

  /// "fixed:<value>", "midpoint" or "sample".
  static BetaPolicy parse(const std::string& text);
  std::string str() const;
  bool needs_bounds() const { return kind != Kind::fixed; }
};

struct RMode {
  bool dynamic = true;
  double value = 1.0;  // used when !dynamic

  /// "dynamic" or "fixed:<value>".
  static RMode parse(const std::string& text);
  std::string str() const;
};

struct TrainConfig {
  std::size_t warm_epochs = 20;
  std::size_t main_epochs = 100;
  std::size_t batch_size = 512;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  BetaPolicy beta;
  std::size_t mc_samples = 1;
  RMode r_mode;
  std::size_t latent = 256;          // k: encoder output, noise and fusion width
  std::size_t encoder_hidden = 256;  // hidden width of the two-layer encoders
  std::size_t head_hidden = 512;     // classification / regression heads; 0 means linear
  std::size_t svdd_width = 256;      // SVDD head hidden and output width
  TaskKind task = TaskKind::classification;
  std::size_t classes = 2;
  double svdd_lambda = 1e-4;
  /// Detach z_i on its way into the VAE heads and xi on its way into the
  /// branch heads, so each loss only updates its own components.
  bool stop_omf_grad_at_z = false;

  void validate() const;
  std::size_t head_outputs() const;
};

struct SvddState {
  std::vector<double> center;
  double lambda = 0.0;
};

/// Encoder [d -> hidden -> k] and head over [z_i, e_i] (warm-up) or [z_i, xi].
struct TrbBranch {
  Mlp encoder;
  Mlp head;

  std::vector<Tensor> parameters() const;
};

Mlp make_head(std::size_t in, const TrainConfig& config, Rng& rng);

class OmibModel {
 public:
  OmibModel(std::span<const std::size_t> input_widths, const TrainConfig& config, Rng& rng);

  std::size_t modalities() const { return branches.size(); }
  std::vector<Tensor> branch_parameters() const;
  std::vector<Tensor> fusion_parameters() const;
  std::vector<Tensor> parameters() const;

  std::vector<TrbBranch> branches;
  std::vector<VaeHead> vaes;
  CrossAttention fuser;
  Mlp fused_head;
  std::optional<SvddState> svdd;
  std::vector<std::size_t> input_widths;
  TrainConfig config;
  double beta = 0.0;
  std::vector<double> r;  // latest r (two views) or r1, r2 (three views)
};

/// classification: mean cross-entropy against `labels`; svdd: mean squared
/// distance to the center plus lambda times the squared parameter norm of
/// `regularized`; regression: mean squared error against `targets`.
Tensor trb_loss(TaskKind task, const Tensor& preds, std::span<const std::size_t> labels,
                std::span<const double> targets, const SvddState* svdd,
                std::span<const Tensor> regularized = {});

/// Per-sample divergence of each branch's prediction from the fused
/// prediction: categorical KL of the softmaxes for classification, half the
/// squared distance otherwise.
std::vector<double> prediction_divergence(TaskKind task, const Tensor& branch_pred,
                                          const Tensor& fused_pred);

/// 1 - tanh(ln mean_n(num_n / den_n)), both clamped at 1e-8 and the ratio
/// clipped to [1e-6, 1e6].
double compute_r(std::span<const double> kl_num, std::span<const double> kl_den);
/// r_j = compute_r(kl[j + 1], kl[0]) for j = 0, 1.
std::vector<double> compute_r_multi(std::span<const std::vector<double>> kl_per_modality);
/// Mean of the clipped ratios.
double mean_kl_ratio(std::span<const double> kl_num, std::span<const double> kl_den);
double r_from_ratio(double ratio);  // 2 / (ratio^2 + 1)

/// Columnwise mean.
std::vector<double> svdd_center(const Matrix& embeddings);

/// xi and fused-head output per MC sample.
struct FusionOutputs {
  std::vector<Tensor> xi;
  std::vector<Tensor> preds;
};

/// `noise[s][m]`: reparameterization noise for MC sample s and modality m.
FusionOutputs fuse(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                   std::span<const std::vector<Tensor>> noise);

struct OmfTerms {
  Tensor loss;                  // head + beta * weighted KLs
  Tensor head_loss;             // fused-head task loss, averaged over MC samples
  std::vector<Tensor> kl;       // batch-mean KL per modality
  std::vector<double> weights;  // 1, r (or 1, r1, r2)
};

/// Fused-head loss plus beta * (KL_1 + r KL_2 [+ r2 KL_3]).
OmfTerms omf_terms(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                   const FusionOutputs& fused, std::span<const std::size_t> labels,
                   std::span<const double> targets, double beta, std::span<const double> r);
OmfTerms omf_loss(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                  std::span<const std::vector<Tensor>> noise, std::span<const std::size_t> labels,
                  std::span<const double> targets, double beta, std::span<const double> r);

/// Everything one main-training step produces.
struct StepOutputs {
  Tensor total;
  FusionOutputs fused;
  OmfTerms omf;
  std::vector<Tensor> trb;
  std::vector<double> r;
  std::vector<double> divergence_mean;
};

/// Main-phase forward pass for one batch. r is computed from this batch's
/// predictions unless the config fixes it.
StepOutputs main_step(const OmibModel& model, const TrainConfig& config,
                      std::span<const Tensor> inputs, std::span<const std::vector<Tensor>> noise,
                      std::span<const std::size_t> labels, std::span<const double> targets);

/// Warm-up loss for one batch with given noise e_i.
std::vector<Tensor> warmup_losses(const OmibModel& model, std::span<const Tensor> inputs,
                                  std::span<const Tensor> noise, std::span<const std::size_t> labels,
                                  std::span<const double> targets);

struct EpochStats {
  std::string phase;  // "warmup" or "main"
  std::size_t epoch = 0;
  double total = 0.0;
  double omf = 0.0;
  double head = 0.0;
  std::vector<double> trb;
  std::vector<double> kl;
  std::vector<double> r_mean;
  double beta = 0.0;
};

struct FinalMetrics {
  std::optional<double> test_accuracy;
  std::optional<double> train_accuracy;
  std::optional<double> test_mse;
  /// Branch heads after warm-up, evaluated with e_i = 0 (classification).
  std::vector<double> warm_branch_test_accuracy;
};

struct RunRecord {
  std::string dataset;
  std::size_t modalities = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  TrainConfig config;
  std::optional<BetaBounds> bounds;
  double beta = 0.0;
  std::vector<EpochStats> epochs;
  std::vector<std::vector<double>> r_steps;  // r_steps[j][step]
  FinalMetrics final;
  double warmup_seconds = 0.0;
  double main_seconds = 0.0;
};

/// Thrown when a loss turns non-finite; carries the phase and step.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& phase, std::size_t step, const std::string& detail);
  std::string phase;
  std::size_t step;
};

/// Optional observer for progress output.
using ProgressFn = std::function<void(const EpochStats&)>;

double resolve_beta(const BetaPolicy& policy, const std::optional<BetaBounds>& bounds,
                    std::uint64_t seed);

/// Algorithm 1: trains encoders and heads with Gaussian noise in place of xi.
/// For SVDD the center is fixed from the initial head outputs first.
std::vector<EpochStats> warmup_train(OmibModel& model, const TrainConfig& config,
                                     const SimDataset& train, const ProgressFn& progress = {});

/// Algorithm 2 from an already warm model. `record` receives epochs, r steps,
/// and beta.
void main_train(OmibModel& model, const TrainConfig& config, const SimDataset& train,
                RunRecord& record, const ProgressFn& progress = {});

struct Inference {
  Matrix xi;
  Matrix predictions;  // logits, SVDD embeddings or regression outputs
  std::vector<std::size_t> classes;  // argmax (classification only)
  std::vector<double> anomaly_scores;  // squared distance to the center (svdd only)
};

/// Deterministic: uses mu in place of samples; branch heads unused.
Inference infer(const OmibModel& model, std::span<const Matrix> views, std::size_t batch_size = 1024);

/// Argmax accuracy of each branch head on [z_i, 0].
std::vector<double> branch_accuracy(const OmibModel& model, const SimDataset& data);

std::vector<double> regression_targets(const SimDataset& ds);

/// Full pipeline: build model, warm up, resolve beta, main training, evaluate.
struct RunResult {
  OmibModel model;
  RunRecord record;
};
RunResult run_omib(const TrainConfig& config, const SimDataset& train, const SimDataset& test,
                   const std::optional<BetaBounds>& bounds, const std::string& dataset_name,
                   const ProgressFn& progress = {});

/// Continue from a warmed model copy (for shared warm-up across sweeps).
RunResult run_omib_from_warm(const OmibModel& warm, const std::vector<EpochStats>& warm_stats,
                             double warm_seconds, const TrainConfig& config,
                             const SimDataset& train, const SimDataset& test,
                             const std::optional<BetaBounds>& bounds,
                             const std::string& dataset_name, const ProgressFn& progress = {});

/// Deep copy (parameters are shared handles otherwise).
OmibModel clone_model(const OmibModel& model);

/// Plain supervised classifier [d -> hidden -> k -> head_hidden -> classes]
/// trained with the same optimizer settings; used for oracle feature views.
struct ClassifierResult {
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
};
ClassifierResult train_feature_classifier(const Matrix& train_x, std::span<const std::size_t> train_y,
                                          const Matrix& test_x, std::span<const std::size_t> test_y,
                                          const TrainConfig& config, std::size_t epochs);

}  // namespace omib
