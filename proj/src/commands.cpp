#include "omib/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "omib/record.hpp"

namespace omib {
namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed",           "preset",           "out",
      "name",           "dataset",          "bounds",
      "quiet",          "sim.n",            "sim.train_fraction",
      "sim.d0",         "sim.d0p",          "sim.d11",
      "sim.d12",        "sim.d21",          "sim.d22",
      "mine.hidden",    "mine.epochs",      "mine.batch_size",
      "mine.lr",        "mine.estimate_batches",
      "train.warm_epochs",                  "train.main_epochs",
      "train.batch_size",                   "train.lr",
      "train.beta",     "train.r_mode",     "train.mc_samples",
      "train.latent",   "train.encoder_hidden",
      "train.head_hidden",                  "train.task",
      "train.svdd_lambda",                  "train.stop_omf_grad_at_z",
      "train.modalities",                   "sweep.grid",
      "sweep.share_warmup",                 "sweep.jobs",
      "table1.oracle_epochs"};
  return keys;
}

void flatten(const json& j, const std::string& prefix, Settings& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    const json& v = it.value();
    if (v.is_object()) {
      flatten(v, key, out);
    } else if (v.is_string()) {
      out.set(key, v.get<std::string>());
    } else if (v.is_boolean()) {
      out.set(key, v.get<bool>() ? "true" : "false");
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      out.set(key, v.dump());
    } else if (v.is_number_float()) {
      std::ostringstream s;
      s << std::setprecision(17) << v.get<double>();
      out.set(key, s.str());
    } else if (v.is_array()) {
      std::string joined;
      for (const json& e : v) {
        if (!joined.empty()) joined += ",";
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      out.set(key, joined);
    } else {
      throw UsageError("config key " + key + " has an unsupported value");
    }
  }
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainConfig with_fixed_beta(TrainConfig c, double beta) {
  c.beta.kind = BetaPolicy::Kind::fixed;
  c.beta.value = beta;
  return c;
}

}  // namespace

Settings Settings::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path.string() + " must be a JSON object");
  Settings s;
  flatten(j, "", s);
  for (const auto& [key, value] : s.values()) {
    if (!known_keys().count(key)) throw UsageError("unknown config key: " + key);
  }
  return s;
}

std::optional<std::string> Settings::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Settings::text(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double Settings::number(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v->empty() || used != v->size() || !std::isfinite(out)) {
    throw UsageError(key + ": '" + *v + "' is not a number");
  }
  return out;
}

std::size_t Settings::count(const std::string& key, std::size_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (v->empty() || !std::all_of(v->begin(), v->end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw UsageError(key + ": '" + *v + "' is not a nonnegative integer");
  }
  try {
    return static_cast<std::size_t>(std::stoull(*v));
  } catch (const std::exception&) {
    throw UsageError(key + ": '" + *v + "' is out of range");
  }
}

std::uint64_t Settings::seed(const std::string& key, std::uint64_t fallback) const {
  return count(key, fallback);
}

bool Settings::flag(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw UsageError(key + ": '" + *v + "' is not a boolean");
}

std::uint64_t resolve_seed(const Settings& s) {
  if (s.has("seed")) return s.seed("seed", 0);
  if (const char* env = std::getenv("OMIB_SEED")) {
    Settings e;
    e.set("OMIB_SEED", env);
    return e.seed("OMIB_SEED", 0);
  }
  return 0;
}

SimConfig sim_config_from(const Settings& s) {
  const std::string preset = s.text("preset", "sim1");
  SimConfig c;
  if (preset != "custom") {
    try {
      c = SimConfig::preset_named(preset);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  c.n = s.count("sim.n", c.n);
  c.train_fraction = s.number("sim.train_fraction", c.train_fraction);
  c.d0 = s.count("sim.d0", c.d0);
  c.d0p = s.count("sim.d0p", c.d0p);
  c.d11 = s.count("sim.d11", c.d11);
  c.d12 = s.count("sim.d12", c.d12);
  c.d21 = s.count("sim.d21", c.d21);
  c.d22 = s.count("sim.d22", c.d22);
  c.seed = resolve_seed(s);
  return c;
}

Sim3Config sim3_config_from(const Settings& s) {
  Sim3Config c;
  c.n = s.count("sim.n", c.n);
  c.train_fraction = s.number("sim.train_fraction", c.train_fraction);
  c.seed = resolve_seed(s);
  return c;
}

MineConfig mine_config_from(const Settings& s) {
  MineConfig c;
  c.hidden = s.count("mine.hidden", c.hidden);
  c.epochs = s.count("mine.epochs", c.epochs);
  c.batch_size = s.count("mine.batch_size", c.batch_size);
  c.lr = s.number("mine.lr", c.lr);
  c.estimate_batches = s.count("mine.estimate_batches", c.estimate_batches);
  c.seed = resolve_seed(s);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

TrainConfig train_config_from(const Settings& s) {
  TrainConfig c;
  try {
    c.warm_epochs = s.count("train.warm_epochs", c.warm_epochs);
    c.main_epochs = s.count("train.main_epochs", c.main_epochs);
    c.batch_size = s.count("train.batch_size", c.batch_size);
    c.lr = s.number("train.lr", c.lr);
    c.seed = resolve_seed(s);
    if (auto b = s.get("train.beta")) c.beta = BetaPolicy::parse(*b);
    c.mc_samples = s.count("train.mc_samples", c.mc_samples);
    if (auto r = s.get("train.r_mode")) c.r_mode = RMode::parse(*r);
    c.latent = s.count("train.latent", c.latent);
    c.encoder_hidden = s.count("train.encoder_hidden", c.encoder_hidden);
    c.head_hidden = s.count("train.head_hidden", c.head_hidden);
    if (auto t = s.get("train.task")) c.task = parse_task(*t);
    c.svdd_lambda = s.number("train.svdd_lambda", c.svdd_lambda);
    c.stop_omf_grad_at_z = s.flag("train.stop_omf_grad_at_z", c.stop_omf_grad_at_z);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

SimDataset generate_from(const Settings& s) {
  try {
    if (s.text("preset", "sim1") == "sim3mod") return generate_sim3(sim3_config_from(s));
    return generate_sim(sim_config_from(s));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

TrainTestSplit load_split(const std::filesystem::path& dataset) {
  SimDataset ds;
  try {
    ds = read_dataset(dataset);
  } catch (const std::exception& e) {
    throw UsageError(std::string("dataset: ") + e.what());
  }
  if (ds.blocks.empty()) throw UsageError("dataset " + dataset.string() + " has no block layout");
  return split_train_test(ds, ds.train_fraction, ds.seed);
}

std::vector<SweepPoint> parse_grid(const std::string& spec, const std::optional<BetaBounds>& bounds) {
  const std::string text = spec == "default" ? "1e-6,1e-4,1e-2,M_l,mid,M_u,2M_u,1,10" : spec;
  std::vector<SweepPoint> points;
  auto need_bounds = [&](const std::string& token) -> const BetaBounds& {
    if (!bounds) throw UsageError("grid token " + token + " needs beta bounds");
    return *bounds;
  };
  if (text.rfind("log:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(4));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("log grid must be log:<lo>:<hi>:<count>");
    Settings tmp;
    tmp.set("lo", parts[0]);
    tmp.set("hi", parts[1]);
    tmp.set("count", parts[2]);
    const double lo = tmp.number("lo", 0), hi = tmp.number("hi", 0);
    const std::size_t count = tmp.count("count", 0);
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw UsageError("bad log grid " + text);
    for (std::size_t i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      const double beta = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
      points.push_back({format_double(beta), beta});
    }
  } else {
    std::stringstream ss(text);
    for (std::string token; std::getline(ss, token, ',');) {
      token.erase(0, token.find_first_not_of(' '));
      token.erase(token.find_last_not_of(' ') + 1);
      if (token.empty()) continue;
      double beta = 0.0;
      if (token == "M_l") {
        beta = need_bounds(token).lower();
      } else if (token == "M_u") {
        beta = need_bounds(token).upper();
      } else if (token == "mid") {
        beta = need_bounds(token).midpoint();
      } else if (token == "2M_u") {
        beta = 2.0 * need_bounds(token).upper();
      } else {
        Settings tmp;
        tmp.set("beta", token);
        beta = tmp.number("beta", 0.0);
      }
      if (!(beta > 0.0)) throw UsageError("grid value " + token + " must be positive");
      points.push_back({token, beta});
    }
  }
  if (points.empty()) throw UsageError("empty beta grid");
  std::stable_sort(points.begin(), points.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.beta < b.beta; });
  return points;
}

double mean_r(const RunRecord& record) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& traj : record.r_steps) {
    for (double r : traj) total += r;
    n += traj.size();
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::vector<SweepRow> run_sweep(const TrainTestSplit& data, const BetaBounds& bounds,
                                const SweepOptions& options, const std::string& dataset_name,
                                std::ostream* log) {
  const std::vector<SweepPoint> points = parse_grid(options.grid, bounds);
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << line << '\n' << std::flush;
  };

  std::optional<OmibModel> warm;
  std::vector<EpochStats> warm_stats;
  double warm_seconds = 0.0;
  if (options.share_warmup) {
    std::vector<std::size_t> widths;
    for (const Matrix& v : data.train.views) widths.push_back(v.cols);
    Rng init_rng(derive_seed(options.train.seed, "init"));
    warm.emplace(widths, options.train, init_rng);
    const auto t0 = std::chrono::steady_clock::now();
    warm_stats = warmup_train(*warm, options.train, data.train);
    warm_seconds = seconds_since(t0);
    say("shared warm-up done in " + format_double(warm_seconds) + " s");
  }

  std::vector<SweepRow> rows(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        const TrainConfig cfg = with_fixed_beta(options.train, points[i].beta);
        const auto t0 = std::chrono::steady_clock::now();
        RunResult res = warm ? run_omib_from_warm(*warm, warm_stats, warm_seconds, cfg, data.train,
                                                  data.test, bounds, dataset_name)
                             : run_omib(cfg, data.train, data.test, bounds, dataset_name);
        SweepRow& row = rows[i];
        row.label = points[i].label;
        row.beta = points[i].beta;
        row.m_l = bounds.lower();
        row.m_u = bounds.upper();
        row.accuracy = res.record.final.test_accuracy.value_or(std::nan(""));
        row.mean_r = mean_r(res.record);
        row.seed = cfg.seed;
        row.wall_seconds = seconds_since(t0);
        row.within_upper = row.beta <= row.m_u;
        row.record = std::move(res.record);
        say("beta " + row.label + " = " + format_double(row.beta) + ": acc " + format_double(row.accuracy) +
            ", mean r " + format_double(row.mean_r));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, points.size()));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "# omib-sweep schema " << kSweepSchemaVersion << '\n';
  out << "beta_label,beta,m_l,m_u,acc,mean_r,seed,wall_seconds,beta_le_m_u\n";
  for (const SweepRow& r : rows) {
    out << r.label << ',' << format_double(r.beta) << ',' << format_double(r.m_l) << ','
        << format_double(r.m_u) << ',' << format_double(r.accuracy) << ',' << format_double(r.mean_r)
        << ',' << r.seed << ',' << std::fixed << std::setprecision(2) << r.wall_seconds
        << std::defaultfloat << ',' << (r.within_upper ? 1 : 0) << '\n';
  }
}

Table1Result run_table1(const TrainTestSplit& data, const std::optional<BetaBounds>& bounds,
                        const Table1Options& options, const std::string& dataset_name,
                        std::ostream* log) {
  std::vector<OracleView> views = {OracleView::consistent_relevant, OracleView::specific_relevant,
                                   OracleView::unimodal1, OracleView::unimodal2};
  if (data.train.modalities() == 3) views.push_back(OracleView::unimodal3);
  views.push_back(OracleView::authentic_optimal);
  views.push_back(OracleView::union_all);

  Table1Result result;
  for (OracleView v : views) {
    const auto t0 = std::chrono::steady_clock::now();
    const ClassifierResult c =
        train_feature_classifier(oracle_feature_view(data.train, v), data.train.labels,
                                 oracle_feature_view(data.test, v), data.test.labels, options.train,
                                 options.oracle_epochs);
    result.rows.push_back({oracle_view_name(v), c.test_accuracy, c.train_accuracy, seconds_since(t0)});
    if (log) *log << oracle_view_name(v) << ": " << format_double(c.test_accuracy) << '\n' << std::flush;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ProgressFn progress;
  if (log) {
    progress = [log](const EpochStats& s) {
      *log << s.phase << ' ' << s.epoch << ": total " << format_double(s.total) << '\n' << std::flush;
    };
  }
  RunResult omib = run_omib(options.train, data.train, data.test, bounds, dataset_name, progress);
  result.rows.push_back({"omib", omib.record.final.test_accuracy.value_or(std::nan("")),
                         omib.record.final.train_accuracy.value_or(std::nan("")), seconds_since(t0)});
  if (log) *log << "omib: " << format_double(result.rows.back().accuracy) << '\n' << std::flush;
  result.omib = std::move(omib.record);
  return result;
}

void write_table1_csv(const std::vector<Table1Row>& rows, std::ostream& out) {
  out << "# omib-table1 schema " << kTable1SchemaVersion << '\n';
  out << "view,acc,train_acc,seconds\n";
  for (const Table1Row& r : rows) {
    out << r.view << ',' << format_double(r.accuracy) << ',' << format_double(r.train_accuracy) << ','
        << std::fixed << std::setprecision(2) << r.seconds << std::defaultfloat << '\n';
  }
}

namespace {

std::filesystem::path with_suffix(std::filesystem::path p, const std::string& suffix) {
  p += suffix;
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
}

std::optional<BetaBounds> load_bounds(const Settings& s) {
  auto path = s.get("bounds");
  if (!path) return std::nullopt;
  try {
    return bounds_from_json(read_json(*path));
  } catch (const std::exception& e) {
    throw UsageError("bounds " + *path + ": " + e.what());
  }
}

std::string dataset_name(const std::filesystem::path& p) {
  std::filesystem::path stem = p;
  if (stem.extension() == ".json" || stem.extension() == ".f64") stem.replace_extension();
  return stem.filename().string();
}

std::filesystem::path require_dataset(const Settings& s) {
  auto d = s.get("dataset");
  if (!d) throw UsageError("--dataset is required");
  return *d;
}

void check_modalities(const Settings& s, const TrainTestSplit& data) {
  if (!s.has("train.modalities")) return;
  const std::size_t m = s.count("train.modalities", 0);
  if (m != data.train.modalities()) {
    throw UsageError("--modalities " + std::to_string(m) + " but the dataset has " +
                     std::to_string(data.train.modalities()));
  }
}

BetaBounds bounds_or_estimate(const Settings& s, const TrainTestSplit& data,
                              const std::filesystem::path& save_to, std::ostream& err) {
  if (auto b = load_bounds(s)) return *b;
  const bool quiet = s.flag("quiet", false);
  if (!quiet) err << "no --bounds given; estimating with MINE\n" << std::flush;
  BetaBounds b = estimate_beta_bounds(data.train.views, mine_config_from(s));
  write_json(to_json(b), save_to);
  return b;
}

int cmd_gen(const Settings& s, std::ostream& out) {
  const SimDataset ds = generate_from(s);
  const std::filesystem::path dir = s.text("out", "data");
  const std::string name = s.text("name", s.text("preset", "sim1"));
  write_dataset(ds, dir, name);
  out << "wrote " << (dir / (name + ".json")).string() << " (" << ds.size() << " samples, "
      << ds.modalities() << " modalities)\n";
  for (std::size_t m = 0; m < ds.modalities(); ++m) {
    out << "  x" << m + 1 << ": " << ds.views[m].cols << " columns:";
    for (const Block& b : ds.blocks) {
      if (m < b.offsets.size() && b.offsets[m]) {
        out << ' ' << b.name << '[' << *b.offsets[m] << '+' << b.width << (b.relevant ? "" : ",s") << ']';
      }
    }
    out << '\n';
  }
  std::size_t positives = 0;
  for (std::size_t y : ds.labels) positives += y;
  out << "  positive labels: " << positives << " / " << ds.size() << '\n';
  return kExitOk;
}

int cmd_bounds(const Settings& s, std::ostream& out) {
  const std::filesystem::path dataset = require_dataset(s);
  const TrainTestSplit data = load_split(dataset);
  const BetaBounds b = estimate_beta_bounds(data.train.views, mine_config_from(s));
  std::filesystem::path path = s.text("out", "");
  if (path.empty()) {
    path = dataset;
    if (path.extension() == ".json") path.replace_extension();
    path = with_suffix(path, ".bounds.json");
  }
  write_json(to_json(b), path);
  out << "wrote " << path.string() << ": m_l " << format_double(b.m_l) << ", m_u " << format_double(b.m_u);
  if (b.m_l2) out << ", m_l2 " << format_double(*b.m_l2) << ", m_u2 " << format_double(*b.m_u2);
  out << '\n';
  return kExitOk;
}

int cmd_train(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dataset = require_dataset(s);
  const TrainTestSplit data = load_split(dataset);
  check_modalities(s, data);
  const TrainConfig cfg = train_config_from(s);
  const std::optional<BetaBounds> bounds = load_bounds(s);
  if (cfg.beta.needs_bounds() && !bounds) {
    throw UsageError("beta policy " + cfg.beta.str() + " needs --bounds (run the bounds command first)");
  }
  ProgressFn progress;
  if (!s.flag("quiet", false)) {
    progress = [&err](const EpochStats& st) {
      err << st.phase << ' ' << st.epoch << ": total " << format_double(st.total) << '\n' << std::flush;
    };
  }
  RunResult res = run_omib(cfg, data.train, data.test, bounds, dataset_name(dataset), progress);
  const std::filesystem::path dir = s.text("out", "run");
  write_json(to_json(res.record), dir / "run.json");
  save_model(res.model, dir / "model");
  out << "wrote " << (dir / "run.json").string() << "; beta " << format_double(res.record.beta);
  if (res.record.final.test_accuracy) out << ", test accuracy " << format_double(*res.record.final.test_accuracy);
  if (res.record.final.test_mse) out << ", test mse " << format_double(*res.record.final.test_mse);
  out << ", mean r " << format_double(mean_r(res.record)) << '\n';
  return kExitOk;
}

int cmd_sweep(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dataset = require_dataset(s);
  const TrainTestSplit data = load_split(dataset);
  check_modalities(s, data);
  SweepOptions opt;
  opt.train = train_config_from(s);
  opt.grid = s.text("sweep.grid", "default");
  opt.share_warmup = s.flag("sweep.share_warmup", false);
  opt.jobs = s.count("sweep.jobs", 1);
  if (opt.jobs == 0) throw UsageError("--jobs must be positive");
  const std::filesystem::path csv = s.text("out", "sweep.csv");
  std::filesystem::path stem = csv;
  stem.replace_extension();
  if (!s.has("bounds")) {
    const std::string g = opt.grid;
    if (g != "default" && g.find("M_") == std::string::npos && g.find("mid") == std::string::npos) {
      parse_grid(g, std::nullopt);
    }
  }
  const BetaBounds bounds = bounds_or_estimate(s, data, with_suffix(stem, ".bounds.json"), err);
  const std::vector<SweepRow> rows =
      run_sweep(data, bounds, opt, dataset_name(dataset), s.flag("quiet", false) ? nullptr : &err);
  std::ostringstream table;
  write_sweep_csv(rows, table);
  write_text(csv, table.str());
  for (const SweepRow& r : rows) {
    write_json(to_json(r.record), with_suffix(stem, "_runs") / ("beta_" + r.label + ".json"));
  }
  out << table.str();
  return kExitOk;
}

int cmd_table1(const Settings& s, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dataset = require_dataset(s);
  const TrainTestSplit data = load_split(dataset);
  check_modalities(s, data);
  Table1Options opt;
  opt.train = train_config_from(s);
  opt.oracle_epochs = s.count("table1.oracle_epochs", opt.oracle_epochs);
  const std::filesystem::path csv = s.text("out", "table1.csv");
  std::filesystem::path stem = csv;
  stem.replace_extension();
  std::optional<BetaBounds> bounds = load_bounds(s);
  if (!bounds && opt.train.beta.needs_bounds()) {
    bounds = bounds_or_estimate(s, data, with_suffix(stem, ".bounds.json"), err);
  }
  const Table1Result res =
      run_table1(data, bounds, opt, dataset_name(dataset), s.flag("quiet", false) ? nullptr : &err);
  std::ostringstream table;
  write_table1_csv(res.rows, table);
  write_text(csv, table.str());
  write_json(to_json(res.omib), with_suffix(stem, "_omib.json"));
  out << table.str();
  return kExitOk;
}

struct FlagBinding {
  CLI::Option* option;
  std::string key;
  std::string* value;
  bool* flag;
};

class Bindings {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    std::string* slot = &strings_.emplace_back();
    bindings_.push_back({app->add_option(name, *slot, help), key, slot, nullptr});
  }
  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    bool* slot = &bools_.emplace_back(false);
    bindings_.push_back({app->add_flag(name, *slot, help), key, nullptr, slot});
  }
  void apply(Settings& s) const {
    for (const FlagBinding& b : bindings_) {
      if (b.option->count() == 0) continue;
      if (b.value) {
        s.set(b.key, *b.value);
      } else {
        s.set(b.key, *b.flag ? "true" : "false");
      }
    }
  }

 private:
  std::deque<std::string> strings_;
  std::deque<bool> bools_;
  std::vector<FlagBinding> bindings_;
};

void add_common(CLI::App* app, Bindings& b, std::string& config) {
  app->add_option("--config", config, "JSON config with flat dotted keys; flags override it");
  b.option(app, "--seed", "seed", "global seed (falls back to OMIB_SEED, then 0)");
  b.flag(app, "--quiet", "quiet", "no progress output");
}

void add_dataset(CLI::App* app, Bindings& b) {
  b.option(app, "--dataset", "dataset", "dataset .json (or stem)");
  b.option(app, "--bounds", "bounds", "bounds JSON from the bounds command");
}

void add_mine(CLI::App* app, Bindings& b) {
  b.option(app, "--mine-hidden", "mine.hidden", "MINE hidden width");
  b.option(app, "--mine-epochs", "mine.epochs", "MINE epochs");
  b.option(app, "--mine-batch", "mine.batch_size", "MINE batch size");
  b.option(app, "--mine-lr", "mine.lr", "MINE learning rate");
  b.option(app, "--mine-estimate-batches", "mine.estimate_batches", "MINE evaluation batches");
}

void add_train(CLI::App* app, Bindings& b) {
  b.option(app, "--warm-epochs", "train.warm_epochs", "warm-up epochs");
  b.option(app, "--main-epochs", "train.main_epochs", "main epochs");
  b.option(app, "--batch-size", "train.batch_size", "batch size");
  b.option(app, "--lr", "train.lr", "Adam learning rate");
  b.option(app, "--beta", "train.beta", "midpoint | sample | fixed:<value>");
  b.option(app, "--r-mode", "train.r_mode", "dynamic | fixed:<value>");
  b.option(app, "--mc-samples", "train.mc_samples", "noise samples per step");
  b.option(app, "--latent", "train.latent", "fusion width k");
  b.option(app, "--task", "train.task", "classification | svdd | regression");
  b.option(app, "--modalities", "train.modalities", "expected modality count");
  b.flag(app, "--stop-omf-grad-at-z", "train.stop_omf_grad_at_z",
         "keep the fusion loss out of the encoders and the branch losses out of the fusion");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"omib: optimal multimodal information bottleneck experiments"};
  app.require_subcommand(1);
  Bindings bindings;
  std::string config;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, bindings, config);
  bindings.option(gen, "--preset", "preset", "sim1 | sim2 | sim3 | sim3mod | custom");
  bindings.option(gen, "--n", "sim.n", "sample count");
  bindings.option(gen, "--train-fraction", "sim.train_fraction", "train share of the split");
  bindings.option(gen, "--name", "name", "file stem (default: preset)");
  bindings.option(gen, "--out", "out", "output directory");
  for (const char* d : {"d0", "d0p", "d11", "d12", "d21", "d22"}) {
    bindings.option(gen, std::string("--") + d, std::string("sim.") + d, std::string("block width ") + d);
  }

  CLI::App* bounds = app.add_subcommand("bounds", "estimate the beta bounds with MINE");
  add_common(bounds, bindings, config);
  bindings.option(bounds, "--dataset", "dataset", "dataset .json (or stem)");
  bindings.option(bounds, "--out", "out", "bounds JSON path");
  add_mine(bounds, bindings);

  CLI::App* train = app.add_subcommand("train", "warm-up plus main training");
  add_common(train, bindings, config);
  add_dataset(train, bindings);
  add_train(train, bindings);
  bindings.option(train, "--out", "out", "output directory for run.json and the model");

  CLI::App* sweep = app.add_subcommand("sweep", "train once per beta and tabulate accuracy");
  add_common(sweep, bindings, config);
  add_dataset(sweep, bindings);
  add_train(sweep, bindings);
  add_mine(sweep, bindings);
  bindings.option(sweep, "--grid", "sweep.grid", "default | comma list (numbers, M_l, mid, M_u, 2M_u) | log:lo:hi:n");
  bindings.flag(sweep, "--share-warmup", "sweep.share_warmup", "warm up once and reuse it for every beta");
  bindings.option(sweep, "--jobs", "sweep.jobs", "concurrent sweep points");
  bindings.option(sweep, "--out", "out", "CSV path");

  CLI::App* table1 = app.add_subcommand("table1", "oracle-view classifiers against OMIB");
  add_common(table1, bindings, config);
  add_dataset(table1, bindings);
  add_train(table1, bindings);
  add_mine(table1, bindings);
  bindings.option(table1, "--oracle-epochs", "table1.oracle_epochs", "epochs for each oracle classifier");
  bindings.option(table1, "--out", "out", "CSV path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Settings s = config.empty() ? Settings{} : Settings::from_json_file(config);
    bindings.apply(s);
    if (gen->parsed()) return cmd_gen(s, out);
    if (bounds->parsed()) return cmd_bounds(s, out);
    if (train->parsed()) return cmd_train(s, out, err);
    if (sweep->parsed()) return cmd_sweep(s, out, err);
    if (table1->parsed()) return cmd_table1(s, out, err);
    err << "no subcommand\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace omib
