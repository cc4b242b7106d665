#include "omib/record.hpp"

#include <fstream>
#include <stdexcept>

namespace omib {
namespace {

using nlohmann::json;

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.warm_epochs = j.at("warm_epochs").get<std::size_t>();
  c.main_epochs = j.at("main_epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta = BetaPolicy::parse(j.at("beta_policy").get<std::string>());
  c.mc_samples = j.at("mc_samples").get<std::size_t>();
  c.r_mode = RMode::parse(j.at("r_mode").get<std::string>());
  c.latent = j.at("latent").get<std::size_t>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::size_t>();
  c.svdd_width = j.at("svdd_width").get<std::size_t>();
  c.task = parse_task(j.at("task").get<std::string>());
  c.classes = j.at("classes").get<std::size_t>();
  c.svdd_lambda = j.at("svdd_lambda").get<double>();
  c.stop_omf_grad_at_z = j.at("stop_omf_grad_at_z").get<bool>();
  return c;
}

}  // namespace

json to_json(const MineConfig& c) {
  return {{"hidden", c.hidden},   {"epochs", c.epochs}, {"batch_size", c.batch_size},
          {"lr", c.lr},           {"seed", c.seed},     {"estimate_batches", c.estimate_batches},
          {"hash", c.hash()}};
}

json to_json(const TrainConfig& c) {
  return {{"warm_epochs", c.warm_epochs},
          {"main_epochs", c.main_epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"seed", c.seed},
          {"beta_policy", c.beta.str()},
          {"mc_samples", c.mc_samples},
          {"r_mode", c.r_mode.str()},
          {"latent", c.latent},
          {"encoder_hidden", c.encoder_hidden},
          {"head_hidden", c.head_hidden},
          {"svdd_width", c.svdd_width},
          {"task", task_name(c.task)},
          {"classes", c.classes},
          {"svdd_lambda", c.svdd_lambda},
          {"stop_omf_grad_at_z", c.stop_omf_grad_at_z}};
}

json to_json(const BetaBounds& b) {
  json mi = json::array();
  for (const PairMi& p : b.mi) {
    mi.push_back({{"i", p.i}, {"j", p.j}, {"raw", p.raw}, {"clamped", p.clamped}});
  }
  json out = {{"schema_version", kBoundsSchemaVersion},
              {"kind", "omib-bounds"},
              {"entropy", b.entropy},
              {"mi", mi},
              {"m_l", b.m_l},
              {"m_u", b.m_u},
              {"mine_hash", b.mine_hash}};
  if (b.m_l2) out["m_l2"] = *b.m_l2;
  if (b.m_u2) out["m_u2"] = *b.m_u2;
  return out;
}

BetaBounds bounds_from_json(const json& j) {
  if (j.value("kind", "") != "omib-bounds" || j.value("schema_version", -1) != kBoundsSchemaVersion) {
    throw std::invalid_argument("not a supported bounds file");
  }
  BetaBounds b;
  b.entropy = j.at("entropy").get<std::vector<double>>();
  for (const json& p : j.at("mi")) {
    b.mi.push_back({p.at("i").get<std::size_t>(), p.at("j").get<std::size_t>(), p.at("raw").get<double>(),
                    p.at("clamped").get<double>()});
  }
  b.m_l = j.at("m_l").get<double>();
  b.m_u = j.at("m_u").get<double>();
  if (j.contains("m_l2")) b.m_l2 = j.at("m_l2").get<double>();
  if (j.contains("m_u2")) b.m_u2 = j.at("m_u2").get<double>();
  b.mine_hash = j.value("mine_hash", "");
  return b;
}

json to_json(const EpochStats& s) {
  json out = {{"phase", s.phase}, {"epoch", s.epoch}, {"total", s.total}, {"trb", s.trb}};
  if (s.phase == "main") {
    out["omf"] = s.omf;
    out["head"] = s.head;
    out["kl"] = s.kl;
    out["r_mean"] = s.r_mean;
    out["beta"] = s.beta;
  }
  return out;
}

json to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const EpochStats& s : r.epochs) epochs.push_back(to_json(s));
  json r_steps = json::object();
  if (r.r_steps.size() == 1) {
    r_steps["r"] = r.r_steps[0];
  } else {
    for (std::size_t j = 0; j < r.r_steps.size(); ++j) r_steps["r" + std::to_string(j + 1)] = r.r_steps[j];
  }
  json final = json::object();
  if (r.final.test_accuracy) final["test_accuracy"] = *r.final.test_accuracy;
  if (r.final.train_accuracy) final["train_accuracy"] = *r.final.train_accuracy;
  if (r.final.test_mse) final["test_mse"] = *r.final.test_mse;
  if (!r.final.warm_branch_test_accuracy.empty()) {
    final["warm_branch_test_accuracy"] = r.final.warm_branch_test_accuracy;
  }
  return {{"schema_version", kRunRecordSchemaVersion},
          {"kind", "omib-run"},
          {"dataset", r.dataset},
          {"modalities", r.modalities},
          {"train_size", r.train_size},
          {"test_size", r.test_size},
          {"config", to_json(r.config)},
          {"bounds", r.bounds ? to_json(*r.bounds) : json(nullptr)},
          {"beta", r.beta},
          {"epochs", epochs},
          {"r_steps", r_steps},
          {"final", final},
          {"timing", {{"warmup_seconds", r.warmup_seconds}, {"main_seconds", r.main_seconds}}}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void write_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_model(const OmibModel& model, const std::filesystem::path& stem) {
  const std::vector<Tensor> params = model.parameters();
  json shapes = json::array();
  for (const Tensor& p : params) shapes.push_back(p.shape());
  json meta = {{"schema_version", kModelSchemaVersion},
               {"kind", "omib-model"},
               {"input_widths", model.input_widths},
               {"config", to_json(model.config)},
               {"beta", model.beta},
               {"r", model.r},
               {"shapes", shapes},
               {"data_file", stem.filename().string() + ".f64"}};
  if (model.svdd) meta["svdd"] = {{"center", model.svdd->center}, {"lambda", model.svdd->lambda}};
  std::filesystem::path data_path = stem;
  data_path += ".f64";
  std::filesystem::path meta_path = stem;
  meta_path += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream data(data_path, std::ios::binary | std::ios::trunc);
  if (!data) throw std::runtime_error("cannot write " + data_path.string());
  for (const Tensor& p : params) {
    std::span<const double> v = p.values();
    data.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  write_json(meta, meta_path);
}

OmibModel load_model(const std::filesystem::path& stem) {
  std::filesystem::path meta_path = stem;
  meta_path += ".json";
  const json meta = read_json(meta_path);
  if (meta.value("kind", "") != "omib-model" || meta.value("schema_version", -1) != kModelSchemaVersion) {
    throw std::invalid_argument("not a supported model file: " + meta_path.string());
  }
  const auto widths = meta.at("input_widths").get<std::vector<std::size_t>>();
  Rng scratch(0);
  OmibModel model(widths, train_config_from_json(meta.at("config")), scratch);
  model.beta = meta.at("beta").get<double>();
  model.r = meta.at("r").get<std::vector<double>>();
  if (meta.contains("svdd")) {
    model.svdd = SvddState{meta["svdd"].at("center").get<std::vector<double>>(),
                           meta["svdd"].at("lambda").get<double>()};
  }
  std::ifstream data(meta_path.parent_path() / meta.at("data_file").get<std::string>(), std::ios::binary);
  if (!data) throw std::runtime_error("model parameters missing for " + meta_path.string());
  std::vector<Tensor> params = model.parameters();
  const json& shapes = meta.at("shapes");
  if (shapes.size() != params.size()) throw std::runtime_error("model file has the wrong parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (shapes[i].get<Shape>() != params[i].shape()) {
      throw std::runtime_error("model parameter " + std::to_string(i) + " has the wrong shape");
    }
    std::span<double> v = params[i].mutable_values();
    data.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!data) throw std::runtime_error("model parameter file truncated");
  }
  return model;
}

}  // namespace omib
