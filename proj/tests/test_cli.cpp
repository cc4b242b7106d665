#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "omib/commands.hpp"
#include "omib/record.hpp"

using namespace omib;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) MESSAGE(err.str());
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("omib_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small network and dataset so every command finishes in well under a second.
fs::path tiny_setup(const fs::path& dir) {
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
  "seed": 4,
  "sim": {"n": 240, "d0": 3, "d0p": 2, "d11": 4, "d12": 2, "d21": 2, "d22": 2},
  "mine": {"epochs": 10, "lr": 0.01, "batch_size": 64, "hidden": 8, "estimate_batches": 2},
  "train": {"latent": 4, "encoder_hidden": 5, "head_hidden": 6, "batch_size": 32,
            "lr": 0.01, "warm_epochs": 1, "main_epochs": 2},
  "table1": {"oracle_epochs": 2},
  "quiet": true
})";
  REQUIRE(cli({"gen", "--config", cfg.string(), "--preset", "custom", "--out", dir.string(), "--name", "tiny"}).code == 0);
  return cfg;
}

std::vector<std::string> csv_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

}  // namespace

TEST_CASE("gen writes the SIM-I file set and reruns byte-identically") {
  const fs::path dir = scratch("gen");
  REQUIRE(cli({"gen", "--preset", "sim1", "--n", "300", "--seed", "7", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"gen", "--preset", "sim1", "--n", "300", "--seed", "7", "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a/sim1.f64") == slurp(dir / "b/sim1.f64"));
  CHECK(slurp(dir / "a/sim1.json") == slurp(dir / "b/sim1.json"));
  const json meta = load(dir / "a/sim1.json");
  bool saw_a1 = false, saw_a2 = false;
  for (const json& b : meta["blocks"]) {
    if (b["name"] == "a1") saw_a1 = b["width"] == 500;
    if (b["name"] == "a2") saw_a2 = b["width"] == 100;
  }
  CHECK(saw_a1);
  CHECK(saw_a2);
  fs::remove_all(dir);
}

TEST_CASE("gen sim3mod writes three matrices") {
  const fs::path dir = scratch("gen3");
  REQUIRE(cli({"gen", "--preset", "sim3mod", "--n", "50", "--out", dir.string()}).code == 0);
  const json meta = load(dir / "sim3mod.json");
  std::size_t views = 0;
  for (const json& m : meta["matrices"]) views += m["name"].get<std::string>().rfind("x", 0) == 0;
  CHECK(views == 3);
  CHECK(meta["modalities"] == 3);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 2") {
  const fs::path dir = scratch("usage");
  CHECK(cli({"gen", "--preset", "sim7"}).code == 2);
  CHECK(cli({"gen", "--n", "ten"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"bounds", "--dataset", (dir / "none.json").string()}).code == 2);
  CHECK(cli({"train", "--dataset", (dir / "none.json").string()}).code == 2);
  std::ofstream(dir / "bad.json") << R"({"train": {"learning_rate": 1}})";
  CHECK(cli({"gen", "--config", (dir / "bad.json").string()}).code == 2);
  CHECK(cli({"gen", "--config", (dir / "missing.json").string()}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("config values apply and flags override them") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "c.json") << R"({"preset": "sim2", "sim.n": 40, "seed": 3})";
  REQUIRE(cli({"gen", "--config", (dir / "c.json").string(), "--out", dir.string()}).code == 0);
  json meta = load(dir / "sim2.json");
  CHECK(meta["n"] == 40);
  CHECK(meta["seed"] == 3);
  REQUIRE(cli({"gen", "--config", (dir / "c.json").string(), "--n", "60", "--seed", "5", "--out", dir.string()}).code == 0);
  meta = load(dir / "sim2.json");
  CHECK(meta["n"] == 60);
  CHECK(meta["seed"] == 5);
  fs::remove_all(dir);
}

TEST_CASE("OMIB_SEED is the seed fallback") {
  const fs::path dir = scratch("env");
  ::setenv("OMIB_SEED", "41", 1);
  REQUIRE(cli({"gen", "--preset", "sim3", "--n", "20", "--out", dir.string()}).code == 0);
  CHECK(load(dir / "sim3.json")["seed"] == 41);
  REQUIRE(cli({"gen", "--preset", "sim3", "--n", "20", "--seed", "2", "--out", dir.string()}).code == 0);
  CHECK(load(dir / "sim3.json")["seed"] == 2);
  ::setenv("OMIB_SEED", "x", 1);
  CHECK(cli({"gen", "--preset", "sim3", "--n", "20", "--out", dir.string()}).code == 2);
  ::unsetenv("OMIB_SEED");
  fs::remove_all(dir);
}

TEST_CASE("bounds JSON for two and three views") {
  const fs::path dir = scratch("bounds");
  const fs::path cfg = tiny_setup(dir);
  const std::string c = cfg.string();
  REQUIRE(cli({"bounds", "--config", c, "--dataset", (dir / "tiny.json").string(), "--out", (dir / "b1.json").string()}).code == 0);
  REQUIRE(cli({"bounds", "--config", c, "--dataset", (dir / "tiny").string(), "--out", (dir / "b2.json").string()}).code == 0);
  const json b = load(dir / "b1.json");
  CHECK(b["kind"] == "omib-bounds");
  CHECK(b["schema_version"] == kBoundsSchemaVersion);
  CHECK(b["m_l"].get<double>() <= b["m_u"].get<double>());
  CHECK(b["mi"][0].contains("raw"));
  CHECK(b["mi"][0].contains("clamped"));
  CHECK(b["entropy"].size() == 2);
  CHECK(b["mine_hash"].get<std::string>().size() == 16);
  CHECK_FALSE(b.contains("m_l2"));
  CHECK(slurp(dir / "b1.json") == slurp(dir / "b2.json"));

  REQUIRE(cli({"gen", "--preset", "sim3mod", "--n", "200", "--out", dir.string()}).code == 0);
  REQUIRE(cli({"bounds", "--config", c, "--dataset", (dir / "sim3mod.json").string()}).code == 0);
  const json b3 = load(dir / "sim3mod.bounds.json");
  CHECK(b3.contains("m_l2"));
  CHECK(b3.contains("m_u2"));
  CHECK(b3["mi"].size() == 3);
  fs::remove_all(dir);
}

TEST_CASE("train writes a run record and a reloadable model") {
  const fs::path dir = scratch("train");
  const std::string c = tiny_setup(dir).string();
  const std::string data = (dir / "tiny.json").string();
  CHECK(cli({"train", "--config", c, "--dataset", data}).code == 2);
  REQUIRE(cli({"bounds", "--config", c, "--dataset", data, "--out", (dir / "b.json").string()}).code == 0);
  const Run r = cli({"train", "--config", c, "--dataset", data, "--bounds", (dir / "b.json").string(), "--out",
                     (dir / "run").string(), "--r-mode", "fixed:1.0"});
  REQUIRE(r.code == 0);
  const json rec = load(dir / "run/run.json");
  CHECK(rec["kind"] == "omib-run");
  CHECK(rec["schema_version"] == kRunRecordSchemaVersion);
  CHECK(RMode::parse(rec["config"]["r_mode"].get<std::string>()).value == 1.0);
  CHECK_FALSE(RMode::parse(rec["config"]["r_mode"].get<std::string>()).dynamic);
  CHECK(rec["final"].contains("test_accuracy"));
  CHECK(rec["timing"].contains("main_seconds"));
  CHECK(fs::exists(dir / "run/model.json"));
  CHECK(fs::exists(dir / "run/model.f64"));
  CHECK(cli({"train", "--config", c, "--dataset", data, "--beta", "fixed:0.1", "--modalities", "3"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("three-modality training logs r1 and r2") {
  const fs::path dir = scratch("train3");
  const std::string c = tiny_setup(dir).string();
  REQUIRE(cli({"gen", "--preset", "sim3mod", "--n", "120", "--out", dir.string()}).code == 0);
  REQUIRE(cli({"train", "--config", c, "--dataset", (dir / "sim3mod.json").string(), "--beta", "fixed:0.01",
               "--modalities", "3", "--out", (dir / "run").string()})
              .code == 0);
  const json rec = load(dir / "run/run.json");
  CHECK(rec["r_steps"].contains("r1"));
  CHECK(rec["r_steps"].contains("r2"));
  for (const char* key : {"r1", "r2"}) {
    for (const json& r : rec["r_steps"][key]) {
      CHECK(r.get<double>() > 0.0);
      CHECK(r.get<double>() < 2.0);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("a diverging run exits with 3") {
  const fs::path dir = scratch("nan");
  const std::string c = tiny_setup(dir).string();
  const Run r = cli({"train", "--config", c, "--dataset", (dir / "tiny.json").string(), "--beta", "fixed:1",
                     "--lr", "1e30", "--out", (dir / "run").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("step") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep emits one sorted row per grid point") {
  const fs::path dir = scratch("sweep");
  const std::string c = tiny_setup(dir).string();
  const std::string data = (dir / "tiny.json").string();
  REQUIRE(cli({"bounds", "--config", c, "--dataset", data, "--out", (dir / "b.json").string()}).code == 0);
  const Run r = cli({"sweep", "--config", c, "--dataset", data, "--bounds", (dir / "b.json").string(),
                     "--share-warmup", "--jobs", "2", "--out", (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "s.csv"));
  REQUIRE(rows.size() == 10);
  CHECK(rows[0] == "beta_label,beta,m_l,m_u,acc,mean_r,seed,wall_seconds,beta_le_m_u");
  double last = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double beta = std::stod(rows[i].substr(rows[i].find(',') + 1));
    CHECK(beta >= last);
    last = beta;
  }
  CHECK(fs::exists(dir / "s_runs/beta_mid.json"));
  CHECK(cli({"sweep", "--config", c, "--dataset", data, "--grid", "", "--out", (dir / "e.csv").string()}).code == 2);
  CHECK(cli({"sweep", "--config", c, "--dataset", data, "--grid", "0.1,0.2", "--out", (dir / "t.csv").string()})
            .code == 0);
  CHECK(csv_rows(slurp(dir / "t.csv")).size() == 3);
  fs::remove_all(dir);
}

TEST_CASE("grid parsing") {
  BetaBounds b;
  b.m_l = 0.01;
  b.m_u = 0.03;
  const auto pts = parse_grid("default", b);
  REQUIRE(pts.size() == 9);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].beta <= pts[i].beta);
  CHECK(parse_grid("log:1e-3:1:4", std::nullopt).back().beta == doctest::Approx(1.0));
  CHECK(parse_grid("log:1e-3:1:4", std::nullopt)[1].beta == doctest::Approx(1e-2));
  CHECK_THROWS_AS(parse_grid("default", std::nullopt), UsageError);
  CHECK_THROWS_AS(parse_grid(" , ", b), UsageError);
  CHECK_THROWS_AS(parse_grid("0.1,-2", b), UsageError);
}

TEST_CASE("table1 lists every oracle view and OMIB") {
  const fs::path dir = scratch("table1");
  const std::string c = tiny_setup(dir).string();
  const Run r = cli({"table1", "--config", c, "--dataset", (dir / "tiny.json").string(), "--out",
                     (dir / "t.csv").string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "t.csv"));
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == "view,acc,train_acc,seconds");
  const std::vector<std::string> names{"consistent-relevant", "specific-relevant", "unimodal-1", "unimodal-2",
                                       "authentic-optimal", "union", "omib"};
  for (std::size_t i = 0; i < names.size(); ++i) CHECK(rows[i + 1].rfind(names[i] + ",", 0) == 0);
  CHECK(fs::exists(dir / "t_omib.json"));
  CHECK(fs::exists(dir / "t.bounds.json"));
  fs::remove_all(dir);
}
