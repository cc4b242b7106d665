#include "omib/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "omib/batching.hpp"
#include "omib/metrics.hpp"

namespace omib {
namespace {

constexpr double kKlFloor = 1e-8;
constexpr double kRatioMin = 1e-6;
constexpr double kRatioMax = 1e6;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw std::invalid_argument(what + ": '" + text + "' is not a number");
  }
  return v;
}

Tensor noise_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> v(rows * cols);
  rng.fill_normal(v);
  return Tensor::from({rows, cols}, std::move(v));
}

std::vector<std::size_t> take(std::span<const std::size_t> values, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

std::vector<double> take(std::span<const double> values, std::span<const std::size_t> idx) {
  std::vector<double> out;
  if (values.empty()) return out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::span<const double> row = m.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void check_views(const OmibModel& model, std::span<const Matrix> views) {
  if (views.size() != model.modalities()) {
    throw ShapeError("model expects " + std::to_string(model.modalities()) + " modalities, got " +
                     std::to_string(views.size()));
  }
  for (std::size_t m = 0; m < views.size(); ++m) {
    if (views[m].cols != model.input_widths[m]) {
      throw ShapeError("modality " + std::to_string(m + 1) + " has width " +
                       std::to_string(views[m].cols) + ", model expects " +
                       std::to_string(model.input_widths[m]));
    }
  }
}

std::vector<Tensor> svdd_regularized(const OmibModel& model, std::size_t m) {
  if (model.config.task != TaskKind::svdd) return {};
  return model.branches[m].parameters();
}

}  // namespace

TaskKind parse_task(const std::string& name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "svdd") return TaskKind::svdd;
  if (name == "regression") return TaskKind::regression;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::string task_name(TaskKind task) {
  switch (task) {
    case TaskKind::classification:
      return "classification";
    case TaskKind::svdd:
      return "svdd";
    case TaskKind::regression:
      return "regression";
  }
  return "classification";
}

BetaPolicy BetaPolicy::parse(const std::string& text) {
  if (text == "midpoint") return {Kind::midpoint, 0.0};
  if (text == "sample") return {Kind::sample, 0.0};
  if (text.rfind("fixed:", 0) == 0) {
    const double v = parse_number(text.substr(6), "beta policy");
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("beta policy: beta must be positive");
    return {Kind::fixed, v};
  }
  throw std::invalid_argument("beta policy must be fixed:<value>, midpoint or sample, got '" + text + "'");
}

std::string BetaPolicy::str() const {
  switch (kind) {
    case Kind::fixed: {
      std::ostringstream out;
      out.precision(17);
      out << "fixed:" << value;
      return out.str();
    }
    case Kind::midpoint:
      return "midpoint";
    case Kind::sample:
      return "sample";
  }
  return "midpoint";
}

RMode RMode::parse(const std::string& text) {
  if (text == "dynamic") return {true, 1.0};
  if (text.rfind("fixed:", 0) == 0) {
    const double v = parse_number(text.substr(6), "r mode");
    if (!(v > 0.0 && v < 2.0)) throw std::invalid_argument("r mode: fixed r must lie in (0, 2)");
    return {false, v};
  }
  throw std::invalid_argument("r mode must be dynamic or fixed:<value>, got '" + text + "'");
}

std::string RMode::str() const {
  if (dynamic) return "dynamic";
  std::ostringstream out;
  out.precision(17);
  out << "fixed:" << value;
  return out.str();
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (mc_samples == 0) throw std::invalid_argument("train: mc samples must be positive");
  if (latent == 0 || encoder_hidden == 0 || svdd_width == 0) {
    throw std::invalid_argument("train: layer widths must be positive");
  }
  if (task == TaskKind::classification && classes < 2) {
    throw std::invalid_argument("train: classification needs at least 2 classes");
  }
  if (svdd_lambda < 0.0) throw std::invalid_argument("train: svdd lambda must be >= 0");
}

std::size_t TrainConfig::head_outputs() const {
  switch (task) {
    case TaskKind::classification:
      return classes;
    case TaskKind::svdd:
      return svdd_width;
    case TaskKind::regression:
      return 1;
  }
  return classes;
}

std::vector<Tensor> TrbBranch::parameters() const {
  std::vector<Tensor> out = encoder.parameters();
  for (const Tensor& p : head.parameters()) out.push_back(p);
  return out;
}

Mlp make_head(std::size_t in, const TrainConfig& config, Rng& rng) {
  switch (config.task) {
    case TaskKind::svdd:
      return Mlp(MlpConfig{{in, config.svdd_width, config.svdd_width}, Activation::leaky_relu,
                           Activation::none},
                 rng);
    case TaskKind::classification:
    case TaskKind::regression:
      break;
  }
  std::vector<std::size_t> widths{in};
  if (config.head_hidden > 0) widths.push_back(config.head_hidden);
  widths.push_back(config.head_outputs());
  return Mlp(MlpConfig{widths, Activation::gelu, Activation::none}, rng);
}

OmibModel::OmibModel(std::span<const std::size_t> widths, const TrainConfig& cfg, Rng& rng)
    : fuser(cfg.latent, widths.size(), rng),
      fused_head(make_head(cfg.latent, cfg, rng)),
      input_widths(widths.begin(), widths.end()),
      config(cfg) {
  config.validate();
  for (std::size_t d : widths) {
    Mlp encoder(MlpConfig{{d, cfg.encoder_hidden, cfg.latent}, Activation::gelu, Activation::none}, rng);
    Mlp head = make_head(2 * cfg.latent, cfg, rng);
    branches.push_back({std::move(encoder), std::move(head)});
    vaes.emplace_back(cfg.latent, cfg.latent, cfg.latent, rng);
  }
  r.assign(widths.size() - 1, 1.0);
}

std::vector<Tensor> OmibModel::branch_parameters() const {
  std::vector<Tensor> out;
  for (const TrbBranch& b : branches) {
    for (const Tensor& p : b.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Tensor> OmibModel::fusion_parameters() const {
  std::vector<Tensor> out;
  for (const VaeHead& v : vaes) {
    for (const Tensor& p : v.parameters()) out.push_back(p);
  }
  for (const Tensor& p : fuser.parameters()) out.push_back(p);
  for (const Tensor& p : fused_head.parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor> OmibModel::parameters() const {
  std::vector<Tensor> out = branch_parameters();
  for (const Tensor& p : fusion_parameters()) out.push_back(p);
  return out;
}

OmibModel clone_model(const OmibModel& model) {
  Rng scratch(0);
  OmibModel out(model.input_widths, model.config, scratch);
  const std::vector<Tensor> src = model.parameters();
  std::vector<Tensor> dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::span<const double> v = src[i].values();
    std::copy(v.begin(), v.end(), dst[i].mutable_values().begin());
  }
  out.svdd = model.svdd;
  out.beta = model.beta;
  out.r = model.r;
  return out;
}

Tensor trb_loss(TaskKind task, const Tensor& preds, std::span<const std::size_t> labels,
                std::span<const double> targets, const SvddState* svdd,
                std::span<const Tensor> regularized) {
  switch (task) {
    case TaskKind::classification:
      return softmax_cross_entropy(preds, labels);
    case TaskKind::svdd: {
      if (svdd == nullptr) throw std::invalid_argument("trb_loss: svdd task needs a center");
      if (preds.rank() != 2 || preds.cols() != svdd->center.size()) {
        throw ShapeError("trb_loss: svdd outputs " + shape_str(preds.shape()) + " vs center of width " +
                         std::to_string(svdd->center.size()));
      }
      Tensor center = Tensor::from({1, svdd->center.size()}, svdd->center);
      Tensor loss = mean_all(sum(square(sub(preds, center)), 1));
      if (svdd->lambda > 0.0) {
        for (const Tensor& p : regularized) {
          loss = add(loss, scale(sum_all(square(p)), svdd->lambda));
        }
      }
      return loss;
    }
    case TaskKind::regression: {
      if (preds.rank() != 2 || preds.cols() != 1 || targets.size() != preds.rows()) {
        throw ShapeError("trb_loss: regression outputs " + shape_str(preds.shape()) + " with " +
                         std::to_string(targets.size()) + " targets");
      }
      Tensor y = Tensor::from({targets.size(), 1}, std::vector<double>(targets.begin(), targets.end()));
      return mean_all(square(sub(preds, y)));
    }
  }
  throw std::invalid_argument("trb_loss: unknown task");
}

std::vector<double> prediction_divergence(TaskKind task, const Tensor& branch_pred,
                                          const Tensor& fused_pred) {
  if (branch_pred.shape() != fused_pred.shape() || branch_pred.rank() != 2) {
    throw ShapeError("prediction_divergence: " + shape_str(branch_pred.shape()) + " vs " +
                     shape_str(fused_pred.shape()));
  }
  NoGradGuard no_grad;
  const std::size_t n = branch_pred.rows();
  const std::size_t c = branch_pred.cols();
  std::vector<double> out(n);
  if (task == TaskKind::classification) {
    Tensor p = softmax(branch_pred.detach(), 1);
    Tensor q = softmax(fused_pred.detach(), 1);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = kl_categorical(p.values().subspan(i * c, c), q.values().subspan(i * c, c));
    }
    return out;
  }
  std::span<const double> a = branch_pred.values();
  std::span<const double> b = fused_pred.values();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = a[i * c + j] - b[i * c + j];
      acc += d * d;
    }
    out[i] = 0.5 * acc;
  }
  return out;
}

double mean_kl_ratio(std::span<const double> kl_num, std::span<const double> kl_den) {
  if (kl_num.size() != kl_den.size()) {
    throw std::invalid_argument("compute_r: " + std::to_string(kl_num.size()) + " numerators vs " +
                                std::to_string(kl_den.size()) + " denominators");
  }
  if (kl_num.empty()) throw std::invalid_argument("compute_r: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < kl_num.size(); ++i) {
    const double ratio = std::max(kl_num[i], kKlFloor) / std::max(kl_den[i], kKlFloor);
    total += std::clamp(ratio, kRatioMin, kRatioMax);
  }
  return total / static_cast<double>(kl_num.size());
}

double compute_r(std::span<const double> kl_num, std::span<const double> kl_den) {
  return 1.0 - std::tanh(std::log(mean_kl_ratio(kl_num, kl_den)));
}

double r_from_ratio(double ratio) { return 2.0 / (ratio * ratio + 1.0); }

std::vector<double> compute_r_multi(std::span<const std::vector<double>> kl_per_modality) {
  if (kl_per_modality.size() < 2) throw std::invalid_argument("compute_r_multi: needs >= 2 modalities");
  std::vector<double> out;
  for (std::size_t j = 1; j < kl_per_modality.size(); ++j) {
    out.push_back(compute_r(kl_per_modality[j], kl_per_modality[0]));
  }
  return out;
}

std::vector<double> svdd_center(const Matrix& embeddings) {
  if (embeddings.rows == 0) throw std::invalid_argument("svdd_center: no embeddings");
  std::vector<double> c(embeddings.cols, 0.0);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    std::span<const double> row = embeddings.row(i);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += row[j];
  }
  for (double& v : c) v /= static_cast<double>(embeddings.rows);
  return c;
}

FusionOutputs fuse(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                   std::span<const std::vector<Tensor>> noise) {
  if (posteriors.size() != model.modalities()) {
    throw ShapeError("fuse: " + std::to_string(posteriors.size()) + " posteriors for " +
                     std::to_string(model.modalities()) + " modalities");
  }
  if (noise.empty()) throw std::invalid_argument("fuse: needs at least one noise sample");
  FusionOutputs out;
  for (const std::vector<Tensor>& eps : noise) {
    if (eps.size() != posteriors.size()) throw ShapeError("fuse: noise does not cover every modality");
    std::vector<Tensor> zetas;
    for (std::size_t m = 0; m < posteriors.size(); ++m) {
      zetas.push_back(reparameterize(posteriors[m], eps[m]));
    }
    Tensor xi = model.fuser.forward(zetas);
    out.preds.push_back(model.fused_head.forward(xi));
    out.xi.push_back(std::move(xi));
  }
  return out;
}

OmfTerms omf_terms(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                   const FusionOutputs& fused, std::span<const std::size_t> labels,
                   std::span<const double> targets, double beta, std::span<const double> r) {
  if (r.size() + 1 != posteriors.size()) {
    throw std::invalid_argument("omf_loss: expected " + std::to_string(posteriors.size() - 1) +
                                " r values, got " + std::to_string(r.size()));
  }
  const SvddState* svdd = model.svdd ? &*model.svdd : nullptr;
  OmfTerms t;
  for (const Tensor& pred : fused.preds) {
    Tensor loss = trb_loss(model.config.task, pred, labels, targets, svdd);
    t.head_loss = t.head_loss.defined() ? add(t.head_loss, loss) : loss;
  }
  if (fused.preds.size() > 1) t.head_loss = scale(t.head_loss, 1.0 / static_cast<double>(fused.preds.size()));
  if (!std::isfinite(t.head_loss.item())) throw NumericError("omf_loss: head term is not finite");

  t.weights.push_back(1.0);
  for (double v : r) t.weights.push_back(v);
  Tensor penalty;
  for (std::size_t m = 0; m < posteriors.size(); ++m) {
    Tensor kl = mean_all(kl_diag_gauss_std(posteriors[m]));
    if (!std::isfinite(kl.item())) {
      throw NumericError("omf_loss: KL term of modality " + std::to_string(m + 1) + " is not finite");
    }
    Tensor weighted = scale(kl, t.weights[m]);
    penalty = penalty.defined() ? add(penalty, weighted) : weighted;
    t.kl.push_back(std::move(kl));
  }
  t.loss = add(t.head_loss, scale(penalty, beta));
  return t;
}

OmfTerms omf_loss(const OmibModel& model, std::span<const VaeHeadOutput> posteriors,
                  std::span<const std::vector<Tensor>> noise, std::span<const std::size_t> labels,
                  std::span<const double> targets, double beta, std::span<const double> r) {
  return omf_terms(model, posteriors, fuse(model, posteriors, noise), labels, targets, beta, r);
}

StepOutputs main_step(const OmibModel& model, const TrainConfig& config,
                      std::span<const Tensor> inputs, std::span<const std::vector<Tensor>> noise,
                      std::span<const std::size_t> labels, std::span<const double> targets) {
  const std::size_t modalities = model.modalities();
  if (inputs.size() != modalities) {
    throw ShapeError("main_step: " + std::to_string(inputs.size()) + " inputs for " +
                     std::to_string(modalities) + " modalities");
  }
  const SvddState* svdd = model.svdd ? &*model.svdd : nullptr;
  std::vector<Tensor> z;
  std::vector<VaeHeadOutput> posteriors;
  for (std::size_t m = 0; m < modalities; ++m) {
    z.push_back(model.branches[m].encoder.forward(inputs[m]));
    posteriors.push_back(model.vaes[m].forward(config.stop_omf_grad_at_z ? z[m].detach() : z[m]));
  }

  StepOutputs out;
  out.fused = fuse(model, posteriors, noise);
  std::vector<std::vector<double>> divergence;
  for (std::size_t m = 0; m < modalities; ++m) {
    Tensor loss;
    for (std::size_t s = 0; s < out.fused.xi.size(); ++s) {
      const Tensor& xi = out.fused.xi[s];
      Tensor pred = model.branches[m].head.forward(concat({z[m], config.stop_omf_grad_at_z ? xi.detach() : xi}, 1));
      if (s == 0) divergence.push_back(prediction_divergence(config.task, pred, out.fused.preds[0]));
      Tensor l = trb_loss(config.task, pred, labels, targets, svdd, svdd_regularized(model, m));
      loss = loss.defined() ? add(loss, l) : l;
    }
    if (out.fused.xi.size() > 1) loss = scale(loss, 1.0 / static_cast<double>(out.fused.xi.size()));
    out.trb.push_back(std::move(loss));
  }
  for (const std::vector<double>& d : divergence) {
    double acc = 0.0;
    for (double v : d) acc += v;
    out.divergence_mean.push_back(acc / static_cast<double>(d.size()));
  }

  if (config.r_mode.dynamic) {
    out.r = compute_r_multi(divergence);
  } else {
    out.r.assign(modalities - 1, config.r_mode.value);
  }
  out.omf = omf_terms(model, posteriors, out.fused, labels, targets, model.beta, out.r);
  out.total = out.omf.loss;
  for (const Tensor& t : out.trb) out.total = add(out.total, t);
  return out;
}

std::vector<Tensor> warmup_losses(const OmibModel& model, std::span<const Tensor> inputs,
                                  std::span<const Tensor> noise, std::span<const std::size_t> labels,
                                  std::span<const double> targets) {
  if (inputs.size() != model.modalities() || noise.size() != model.modalities()) {
    throw ShapeError("warmup: inputs and noise must cover every modality");
  }
  const SvddState* svdd = model.svdd ? &*model.svdd : nullptr;
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < model.modalities(); ++m) {
    Tensor z = model.branches[m].encoder.forward(inputs[m]);
    Tensor pred = model.branches[m].head.forward(concat({z, noise[m]}, 1));
    out.push_back(trb_loss(model.config.task, pred, labels, targets, svdd, svdd_regularized(model, m)));
  }
  return out;
}

TrainingDiverged::TrainingDiverged(const std::string& phase_, std::size_t step_, const std::string& detail)
    : NumericError(phase_ + " step " + std::to_string(step_) + ": " + detail), phase(phase_), step(step_) {}

double resolve_beta(const BetaPolicy& policy, const std::optional<BetaBounds>& bounds,
                    std::uint64_t seed) {
  if (policy.kind == BetaPolicy::Kind::fixed) {
    if (!(policy.value > 0.0)) throw std::invalid_argument("beta must be positive");
    return policy.value;
  }
  if (!bounds) {
    throw std::invalid_argument("beta policy '" + policy.str() +
                                "' needs beta bounds; run the `bounds` command first");
  }
  if (policy.kind == BetaPolicy::Kind::midpoint) return bounds->midpoint();
  Rng rng(derive_seed(seed, "beta"));
  return rng.uniform(bounds->lower(), bounds->upper());
}

std::vector<double> regression_targets(const SimDataset& ds) {
  return std::vector<double>(ds.labels.begin(), ds.labels.end());
}

std::vector<EpochStats> warmup_train(OmibModel& model, const TrainConfig& config,
                                     const SimDataset& train, const ProgressFn& progress) {
  check_views(model, train.views);
  const std::size_t modalities = model.modalities();
  const std::size_t k = config.latent;
  const std::vector<double> targets = regression_targets(train);
  Rng order_rng(derive_seed(config.seed, "warmup-order"));
  Rng noise_rng(derive_seed(config.seed, "warmup-noise"));

  if (config.task == TaskKind::svdd && !model.svdd) {
    // Center from the untrained heads' mean output over the training set.
    NoGradGuard no_grad;
    Rng center_rng(derive_seed(config.seed, "svdd-center"));
    std::vector<double> sum(config.svdd_width, 0.0);
    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (std::span<const std::size_t> batch : batches_of(all, 1024)) {
      for (std::size_t m = 0; m < modalities; ++m) {
        Tensor z = model.branches[m].encoder.forward(gather_batch(train.views[m], batch));
        Tensor pred = model.branches[m].head.forward(concat({z, noise_tensor(center_rng, batch.size(), k)}, 1));
        std::span<const double> v = pred.values();
        for (std::size_t i = 0; i < batch.size(); ++i) {
          for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += v[i * sum.size() + j];
        }
      }
    }
    for (double& s : sum) s /= static_cast<double>(train.size() * modalities);
    model.svdd = SvddState{std::move(sum), config.svdd_lambda};
  }

  Adam opt(model.branch_parameters(), AdamConfig{.lr = config.lr});
  std::vector<EpochStats> history;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.warm_epochs; ++epoch) {
    const std::vector<std::size_t> order = order_rng.permutation(train.size());
    EpochStats stats;
    stats.phase = "warmup";
    stats.epoch = epoch;
    stats.trb.assign(modalities, 0.0);
    for (std::span<const std::size_t> batch : batches_of(order, config.batch_size)) {
      std::vector<Tensor> inputs, noise;
      for (std::size_t m = 0; m < modalities; ++m) {
        inputs.push_back(gather_batch(train.views[m], batch));
        noise.push_back(noise_tensor(noise_rng, batch.size(), k));
      }
      const std::vector<std::size_t> labels = take(train.labels, batch);
      const std::vector<double> batch_targets = take(targets, batch);
      Tape tape;
      try {
        std::vector<Tensor> losses = warmup_losses(model, inputs, noise, labels, batch_targets);
        Tensor total = losses[0];
        for (std::size_t m = 1; m < modalities; ++m) total = add(total, losses[m]);
        tape.backward(total);
        const double w = static_cast<double>(batch.size());
        for (std::size_t m = 0; m < modalities; ++m) stats.trb[m] += w * losses[m].item();
        stats.total += w * total.item();
      } catch (const NumericError& e) {
        throw TrainingDiverged("warmup", step, e.what());
      }
      opt.step();
      opt.zero_grad();
      ++step;
    }
    const double n = static_cast<double>(train.size());
    stats.total /= n;
    for (double& v : stats.trb) v /= n;
    history.push_back(stats);
    if (progress) progress(stats);
  }
  return history;
}

void main_train(OmibModel& model, const TrainConfig& config, const SimDataset& train,
                RunRecord& record, const ProgressFn& progress) {
  check_views(model, train.views);
  const std::size_t modalities = model.modalities();
  const std::size_t k = config.latent;
  const std::vector<double> targets = regression_targets(train);
  Rng order_rng(derive_seed(config.seed, "main-order"));
  Rng noise_rng(derive_seed(config.seed, "main-noise"));
  Adam opt(model.parameters(), AdamConfig{.lr = config.lr});
  record.beta = model.beta;
  record.r_steps.assign(modalities - 1, {});

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.main_epochs; ++epoch) {
    const std::vector<std::size_t> order = order_rng.permutation(train.size());
    EpochStats stats;
    stats.phase = "main";
    stats.epoch = epoch;
    stats.beta = model.beta;
    stats.trb.assign(modalities, 0.0);
    stats.kl.assign(modalities, 0.0);
    stats.r_mean.assign(modalities - 1, 0.0);
    std::size_t steps_this_epoch = 0;
    for (std::span<const std::size_t> batch : batches_of(order, config.batch_size)) {
      std::vector<Tensor> inputs;
      for (std::size_t m = 0; m < modalities; ++m) inputs.push_back(gather_batch(train.views[m], batch));
      std::vector<std::vector<Tensor>> noise(config.mc_samples);
      for (std::vector<Tensor>& eps : noise) {
        for (std::size_t m = 0; m < modalities; ++m) eps.push_back(noise_tensor(noise_rng, batch.size(), k));
      }
      const std::vector<std::size_t> labels = take(train.labels, batch);
      const std::vector<double> batch_targets = take(targets, batch);
      Tape tape;
      try {
        StepOutputs out = main_step(model, config, inputs, noise, labels, batch_targets);
        tape.backward(out.total);
        const double w = static_cast<double>(batch.size());
        stats.total += w * out.total.item();
        stats.omf += w * out.omf.loss.item();
        stats.head += w * out.omf.head_loss.item();
        for (std::size_t m = 0; m < modalities; ++m) {
          stats.trb[m] += w * out.trb[m].item();
          stats.kl[m] += w * out.omf.kl[m].item();
        }
        for (std::size_t j = 0; j + 1 < modalities; ++j) {
          stats.r_mean[j] += out.r[j];
          record.r_steps[j].push_back(out.r[j]);
        }
        model.r = out.r;
      } catch (const NumericError& e) {
        throw TrainingDiverged("main", step, e.what());
      }
      opt.step();
      opt.zero_grad();
      ++step;
      ++steps_this_epoch;
    }
    const double n = static_cast<double>(train.size());
    stats.total /= n;
    stats.omf /= n;
    stats.head /= n;
    for (double& v : stats.trb) v /= n;
    for (double& v : stats.kl) v /= n;
    for (double& v : stats.r_mean) v /= static_cast<double>(std::max<std::size_t>(steps_this_epoch, 1));
    record.epochs.push_back(stats);
    if (progress) progress(stats);
  }
}

Inference infer(const OmibModel& model, std::span<const Matrix> views, std::size_t batch_size) {
  check_views(model, views);
  NoGradGuard no_grad;
  const std::size_t n = views[0].rows;
  for (const Matrix& v : views) {
    if (v.rows != n) throw ShapeError("infer: modalities have different sample counts");
  }
  Inference out;
  out.xi = Matrix(n, model.config.latent);
  out.predictions = Matrix(n, model.config.head_outputs());
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::size_t row = 0;
  for (std::span<const std::size_t> batch : batches_of(all, std::max<std::size_t>(batch_size, 1))) {
    std::vector<Tensor> mus;
    for (std::size_t m = 0; m < model.modalities(); ++m) {
      Tensor z = model.branches[m].encoder.forward(gather_batch(views[m], batch));
      mus.push_back(model.vaes[m].forward(z).mu);
    }
    Tensor xi = model.fuser.forward(mus);
    Tensor pred = model.fused_head.forward(xi);
    std::copy(xi.values().begin(), xi.values().end(),
              out.xi.values.begin() + static_cast<std::ptrdiff_t>(row * out.xi.cols));
    std::copy(pred.values().begin(), pred.values().end(),
              out.predictions.values.begin() + static_cast<std::ptrdiff_t>(row * out.predictions.cols));
    row += batch.size();
  }
  if (model.config.task == TaskKind::classification) out.classes = argmax_rows(out.predictions);
  if (model.config.task == TaskKind::svdd) {
    if (!model.svdd) throw std::logic_error("infer: svdd model has no center");
    const std::vector<double>& c = model.svdd->center;
    out.anomaly_scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      std::span<const double> p = out.predictions.row(i);
      for (std::size_t j = 0; j < c.size(); ++j) acc += (p[j] - c[j]) * (p[j] - c[j]);
      out.anomaly_scores[i] = acc;
    }
  }
  return out;
}

std::vector<double> branch_accuracy(const OmibModel& model, const SimDataset& data) {
  check_views(model, data.views);
  NoGradGuard no_grad;
  std::vector<double> out;
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t m = 0; m < model.modalities(); ++m) {
    std::vector<std::size_t> predicted;
    for (std::span<const std::size_t> batch : batches_of(all, 1024)) {
      Tensor z = model.branches[m].encoder.forward(gather_batch(data.views[m], batch));
      Tensor pred = model.branches[m].head.forward(
          concat({z, Tensor::zeros({batch.size(), model.config.latent})}, 1));
      for (std::size_t c : argmax_rows(to_matrix(pred))) predicted.push_back(c);
    }
    out.push_back(accuracy(predicted, data.labels));
  }
  return out;
}

RunResult run_omib_from_warm(const OmibModel& warm, const std::vector<EpochStats>& warm_stats,
                             double warm_seconds, const TrainConfig& config,
                             const SimDataset& train, const SimDataset& test,
                             const std::optional<BetaBounds>& bounds,
                             const std::string& dataset_name, const ProgressFn& progress) {
  config.validate();
  RunResult result{clone_model(warm), RunRecord{}};
  OmibModel& model = result.model;
  model.config = config;
  RunRecord& rec = result.record;
  rec.dataset = dataset_name;
  rec.modalities = model.modalities();
  rec.train_size = train.size();
  rec.test_size = test.size();
  rec.config = config;
  rec.bounds = bounds;
  rec.epochs = warm_stats;
  rec.warmup_seconds = warm_seconds;
  if (config.task == TaskKind::classification) {
    rec.final.warm_branch_test_accuracy = branch_accuracy(model, test);
  }

  model.beta = resolve_beta(config.beta, bounds, config.seed);
  const auto t0 = std::chrono::steady_clock::now();
  main_train(model, config, train, rec, progress);
  rec.main_seconds = seconds_since(t0);

  if (config.task == TaskKind::classification) {
    rec.final.test_accuracy = accuracy(infer(model, test.views).classes, test.labels);
    rec.final.train_accuracy = accuracy(infer(model, train.views).classes, train.labels);
  } else if (config.task == TaskKind::regression) {
    const Inference inf = infer(model, test.views);
    double acc = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const double d = inf.predictions.at(i, 0) - static_cast<double>(test.labels[i]);
      acc += d * d;
    }
    rec.final.test_mse = acc / static_cast<double>(test.size());
  }
  return result;
}

RunResult run_omib(const TrainConfig& config, const SimDataset& train, const SimDataset& test,
                   const std::optional<BetaBounds>& bounds, const std::string& dataset_name,
                   const ProgressFn& progress) {
  config.validate();
  if (config.beta.needs_bounds() && !bounds) resolve_beta(config.beta, bounds, config.seed);
  std::vector<std::size_t> widths;
  for (const Matrix& v : train.views) widths.push_back(v.cols);
  Rng init_rng(derive_seed(config.seed, "init"));
  OmibModel model(widths, config, init_rng);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<EpochStats> warm = warmup_train(model, config, train, progress);
  const double warm_seconds = seconds_since(t0);
  return run_omib_from_warm(model, warm, warm_seconds, config, train, test, bounds, dataset_name, progress);
}

ClassifierResult train_feature_classifier(const Matrix& train_x, std::span<const std::size_t> train_y,
                                          const Matrix& test_x, std::span<const std::size_t> test_y,
                                          const TrainConfig& config, std::size_t epochs) {
  config.validate();
  if (train_x.rows != train_y.size() || test_x.rows != test_y.size()) {
    throw ShapeError("feature classifier: row and label counts differ");
  }
  if (train_x.cols != test_x.cols) throw ShapeError("feature classifier: train/test widths differ");
  Rng init_rng(derive_seed(config.seed, "oracle-init"));
  std::vector<std::size_t> widths{train_x.cols, config.encoder_hidden, config.latent};
  if (config.head_hidden > 0) widths.push_back(config.head_hidden);
  widths.push_back(config.classes);
  Mlp net(MlpConfig{widths, Activation::gelu, Activation::none}, init_rng);
  Adam opt(net.parameters(), AdamConfig{.lr = config.lr});
  Rng order_rng(derive_seed(config.seed, "oracle-order"));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order = order_rng.permutation(train_x.rows);
    for (std::span<const std::size_t> batch : batches_of(order, config.batch_size)) {
      Tape tape;
      Tensor loss = softmax_cross_entropy(net.forward(gather_batch(train_x, batch)), take(train_y, batch));
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
  }
  auto evaluate = [&](const Matrix& x, std::span<const std::size_t> y) {
    NoGradGuard no_grad;
    std::vector<std::size_t> all(x.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::size_t> predicted;
    for (std::span<const std::size_t> batch : batches_of(all, 1024)) {
      for (std::size_t c : argmax_rows(to_matrix(net.forward(gather_batch(x, batch))))) predicted.push_back(c);
    }
    return accuracy(predicted, y);
  };
  return {evaluate(test_x, test_y), evaluate(train_x, train_y)};
}

}  // namespace omib
