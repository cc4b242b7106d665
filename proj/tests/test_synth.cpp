#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "omib/synth.hpp"

using namespace omib;

namespace {

SimDataset small_sim1(std::uint64_t seed = 7, std::size_t n = 600) {
  SimConfig c = SimConfig::preset_named("sim1");
  c.n = n;
  c.seed = seed;
  return generate_sim(c);
}

// Label from the relevant blocks in union order, dotted with `delta` scaled by `sign`.
std::vector<std::size_t> labels_from(const SimDataset& ds, double sign) {
  const Matrix rel = oracle_feature_view(ds, OracleView::authentic_optimal);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rel.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < rel.cols; ++j) s += rel.at(i, j) * sign * ds.delta[j];
    out.push_back(s > 0.0 ? 1 : 0);
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("omib_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("SIM-I layout and widths") {
  const SimDataset ds = small_sim1();
  REQUIRE(ds.modalities() == 2);
  CHECK(ds.views[0].cols == 200 + 200 + 200 + 500);
  CHECK(ds.views[1].cols == 200 + 200 + 200 + 100);
  CHECK(ds.block("a1").width == 500);
  CHECK(ds.block("a2").width == 100);
  CHECK(oracle_feature_view(ds, OracleView::authentic_optimal).cols == 800);
  CHECK(oracle_feature_view(ds, OracleView::consistent_relevant).cols == 200);
  CHECK(oracle_feature_view(ds, OracleView::specific_relevant).cols == 600);
  CHECK(oracle_feature_view(ds, OracleView::union_all).cols == 1400);
  CHECK(ds.delta.size() == 800);
  CHECK_THROWS(oracle_feature_view(ds, OracleView::unimodal3));
}

TEST_CASE("presets swap and balance the specific widths") {
  CHECK(SimConfig::preset_named("sim2").d11 == 100);
  CHECK(SimConfig::preset_named("sim2").d21 == 500);
  CHECK(SimConfig::preset_named("sim3").d11 == 300);
  CHECK(SimConfig::preset_named("sim3").d21 == 300);
  CHECK_THROWS_AS(SimConfig::preset_named("sim9"), std::invalid_argument);
}

TEST_CASE("shared blocks are copied into every observing modality") {
  const SimDataset ds = small_sim1(3, 50);
  const Block& a0 = ds.block("a0");
  const Block& b0 = ds.block("b0");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < a0.width; ++j) {
      CHECK(ds.views[0].at(i, *a0.offsets[0] + j) == ds.views[1].at(i, *a0.offsets[1] + j));
    }
    for (std::size_t j = 0; j < b0.width; ++j) {
      CHECK(ds.views[0].at(i, *b0.offsets[0] + j) == ds.views[1].at(i, *b0.offsets[1] + j));
    }
  }
}

TEST_CASE("labels are the sign of the hyperplane over relevant blocks") {
  const SimDataset ds = small_sim1();
  CHECK(labels_from(ds, 1.0) == ds.labels);
  const auto flipped = labels_from(ds, -1.0);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(flipped[i] == 1 - ds.labels[i]);
}

TEST_CASE("reseeding the superfluous blocks leaves labels and relevant blocks alone") {
  SimConfig c = SimConfig::preset_named("sim1");
  c.n = 300;
  c.seed = 5;
  const SimDataset a = generate_sim(c);
  c.superfluous_seed = 999;
  const SimDataset b = generate_sim(c);
  CHECK(a.labels == b.labels);
  CHECK(oracle_feature_view(a, OracleView::authentic_optimal) ==
        oracle_feature_view(b, OracleView::authentic_optimal));
  CHECK_FALSE(a.views[0] == b.views[0]);
}

TEST_CASE("labels are balanced on the full SIM-I draw") {
  SimConfig c = SimConfig::preset_named("sim1");
  c.seed = 7;
  const SimDataset ds = generate_sim(c);
  std::size_t pos = 0;
  for (std::size_t y : ds.labels) pos += y;
  const double share = static_cast<double>(pos) / ds.size();
  CHECK(share >= 0.48);
  CHECK(share <= 0.52);

  const TrainTestSplit split = split_train_test(ds, 0.9, 7);
  CHECK(split.train.size() == 9000);
  CHECK(split.test.size() == 1000);
  std::set<std::size_t> ids(split.train.sample_ids.begin(), split.train.sample_ids.end());
  ids.insert(split.test.sample_ids.begin(), split.test.sample_ids.end());
  CHECK(ids.size() == 10000);
}

TEST_CASE("split is seeded and keeps rows aligned with labels") {
  const SimDataset ds = small_sim1(7, 200);
  const TrainTestSplit s1 = split_train_test(ds, 0.75, 1);
  const TrainTestSplit s2 = split_train_test(ds, 0.75, 1);
  const TrainTestSplit s3 = split_train_test(ds, 0.75, 2);
  CHECK(s1.train.sample_ids == s2.train.sample_ids);
  CHECK(s1.train.sample_ids != s3.train.sample_ids);
  for (std::size_t i = 0; i < s1.test.size(); ++i) {
    const std::size_t id = s1.test.sample_ids[i];
    CHECK(s1.test.labels[i] == ds.labels[id]);
    CHECK(s1.test.views[1].at(i, 3) == ds.views[1].at(id, 3));
  }
  CHECK_THROWS(split_train_test(ds, 0.0, 1));
  CHECK_THROWS(split_train_test(ds, 1.0, 1));
}

TEST_CASE("three-modality generator") {
  Sim3Config c;
  c.n = 400;
  c.seed = 2;
  const SimDataset ds = generate_sim3(c);
  REQUIRE(ds.modalities() == 3);
  const std::size_t own = 100 + 2 * 50 + 100;
  for (const Matrix& v : ds.views) CHECK(v.cols == 2 * own);
  CHECK(oracle_feature_view(ds, OracleView::consistent_relevant).cols == 100);
  CHECK(oracle_feature_view(ds, OracleView::authentic_optimal).cols == 100 + 3 * 50 + 300);
  CHECK(oracle_feature_view(ds, OracleView::unimodal3).cols == 2 * own);
  CHECK(labels_from(ds, 1.0) == ds.labels);
  const Block& a12 = ds.block("a12");
  CHECK(a12.offsets[0].has_value());
  CHECK(a12.offsets[1].has_value());
  CHECK_FALSE(a12.offsets[2].has_value());
}

TEST_CASE("dataset files round-trip and are byte-identical on rerun") {
  const auto dir = scratch_dir("synth_io");
  const SimDataset ds = small_sim1(7, 120);
  write_dataset(ds, dir, "first");
  write_dataset(small_sim1(7, 120), dir, "second");
  CHECK(slurp(dir / "first.f64") == slurp(dir / "second.f64"));
  CHECK(std::filesystem::file_size(dir / "first.f64") ==
        sizeof(double) * (120 * (1100 + 700) + 120 + 800));

  const SimDataset back = read_dataset(dir / "first.json");
  CHECK(back.views == ds.views);
  CHECK(back.labels == ds.labels);
  CHECK(back.delta == ds.delta);
  CHECK(back.blocks.size() == ds.blocks.size());
  CHECK(read_dataset(dir / "first").labels == ds.labels);
  CHECK_THROWS(read_dataset(dir / "missing.json"));

  Sim3Config c3;
  c3.n = 50;
  write_dataset(generate_sim3(c3), dir, "three");
  CHECK(read_dataset(dir / "three").modalities() == 3);
  std::filesystem::remove_all(dir);
}
