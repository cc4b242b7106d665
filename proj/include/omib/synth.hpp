#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omib {

/// Plain row-major matrix used for datasets (no gradient machinery).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }

  Matrix select_rows(std::span<const std::size_t> index) const;
  bool operator==(const Matrix&) const = default;
};

/// Two-modality generator settings. Observations are
///   x1 = [b0; b1; a0; a1],  x2 = [b0; b2; a0; a2]
/// with a-blocks task-relevant and b-blocks superfluous.
struct SimConfig {
  std::string preset = "custom";
  std::size_t d0 = 200;   // shared relevant a0
  std::size_t d0p = 200;  // shared superfluous b0
  std::size_t d11 = 500;  // modality-1 relevant a1
  std::size_t d12 = 200;  // modality-1 superfluous b1
  std::size_t d21 = 100;  // modality-2 relevant a2
  std::size_t d22 = 200;  // modality-2 superfluous b2
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  /// Seed for the superfluous blocks; derived from `seed` when absent.
  std::optional<std::uint64_t> superfluous_seed;

  void validate() const;
  /// sim1, sim2, sim3. Throws std::invalid_argument on unknown names.
  static SimConfig preset_named(const std::string& name);
};

/// Three-modality generator following the Venn structure of three views: one
/// block shared by all, one per pair, one per modality, for both relevant (a)
/// and superfluous (b) information.
struct Sim3Config {
  std::string preset = "sim3mod";
  std::size_t a_all = 100;
  std::size_t a_pair = 50;
  std::array<std::size_t, 3> a_own{100, 100, 100};
  std::size_t b_all = 100;
  std::size_t b_pair = 50;
  std::array<std::size_t, 3> b_own{100, 100, 100};
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  std::optional<std::uint64_t> superfluous_seed;

  void validate() const;
};

/// A named column block. `offsets[m]` is the first column of the block in
/// modality m's matrix, absent when the modality does not observe it.
struct Block {
  std::string name;
  std::size_t width = 0;
  bool relevant = false;
  std::vector<std::optional<std::size_t>> offsets;
};

struct SimDataset {
  std::string preset;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  std::vector<Matrix> views;
  std::vector<std::size_t> labels;
  std::vector<double> delta;  // separating hyperplane over the relevant blocks
  std::vector<Block> blocks;  // union order; its relevant subsequence is the hyperplane order
  std::vector<std::size_t> sample_ids;

  std::size_t size() const { return labels.size(); }
  std::size_t modalities() const { return views.size(); }
  const Block& block(const std::string& name) const;
  SimDataset subset(std::span<const std::size_t> index) const;
};

SimDataset generate_sim(const SimConfig& config);
SimDataset generate_sim3(const Sim3Config& config);

struct TrainTestSplit {
  SimDataset train;
  SimDataset test;
};

/// Seeded shuffle, first round(n * fraction) samples to train.
TrainTestSplit split_train_test(const SimDataset& ds, double fraction, std::uint64_t seed);

enum class OracleView {
  consistent_relevant,  // a0 (shared by every modality)
  specific_relevant,    // relevant blocks not shared by all modalities
  unimodal1,
  unimodal2,
  unimodal3,
  authentic_optimal,  // every relevant block
  union_all,          // every block once
};

OracleView parse_oracle_view(const std::string& name);
std::string oracle_view_name(OracleView view);
Matrix oracle_feature_view(const SimDataset& ds, OracleView view);
/// Blocks gathered in the given order from whichever modality observes them.
Matrix assemble_blocks(const SimDataset& ds, std::span<const std::string> names);

// Persistence: `<name>.f64` (little-endian doubles: each view row-major, then
// labels, then delta) plus `<name>.json` describing shapes and layout.
inline constexpr int kDatasetSchemaVersion = 1;
void write_dataset(const SimDataset& ds, const std::filesystem::path& dir,
                   const std::string& name);
/// Accepts either the .json sidecar path or the stem.
SimDataset read_dataset(const std::filesystem::path& path);

}  // namespace omib
