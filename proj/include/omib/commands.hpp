#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omib/mine.hpp"
#include "omib/synth.hpp"
#include "omib/train.hpp"

namespace omib {

/// Bad flags, config values or missing inputs (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr int kSweepSchemaVersion = 1;
inline constexpr int kTable1SchemaVersion = 1;

/// Flat dotted-key settings ("train.lr" -> "1e-4"). Values are kept as text
/// and parsed by whichever command consumes them.
class Settings {
 public:
  /// Loads a JSON object whose values are scalars. Nested objects are
  /// flattened with dots.
  static Settings from_json_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Explicit "seed" setting, else OMIB_SEED, else 0.
std::uint64_t resolve_seed(const Settings& s);

SimConfig sim_config_from(const Settings& s);
Sim3Config sim3_config_from(const Settings& s);
MineConfig mine_config_from(const Settings& s);
TrainConfig train_config_from(const Settings& s);

/// Generates the preset named by "preset" (sim1, sim2, sim3, sim3mod, custom).
SimDataset generate_from(const Settings& s);

/// Dataset from disk, split with the seed and fraction it was generated with.
TrainTestSplit load_split(const std::filesystem::path& dataset);

struct SweepPoint {
  std::string label;  // grid token ("1e-06", "M_l", "mid", ...)
  double beta = 0.0;
};

/// "default", an explicit comma list mixing numbers and the tokens M_l, mid,
/// M_u, 2M_u, or "log:<lo>:<hi>:<count>". Sorted by beta.
std::vector<SweepPoint> parse_grid(const std::string& spec, const std::optional<BetaBounds>& bounds);

struct SweepRow {
  std::string label;
  double beta = 0.0;
  double m_l = 0.0;
  double m_u = 0.0;
  double accuracy = 0.0;
  double mean_r = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool within_upper = false;  // beta <= M_u
  RunRecord record;
};

struct SweepOptions {
  TrainConfig train;
  std::string grid = "default";
  bool share_warmup = false;
  std::size_t jobs = 1;
};

std::vector<SweepRow> run_sweep(const TrainTestSplit& data, const BetaBounds& bounds,
                                const SweepOptions& options, const std::string& dataset_name,
                                std::ostream* log = nullptr);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

struct Table1Row {
  std::string view;  // oracle view name or "omib"
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  double seconds = 0.0;
};

struct Table1Options {
  TrainConfig train;
  std::size_t oracle_epochs = 20;
};

struct Table1Result {
  std::vector<Table1Row> rows;
  RunRecord omib;
};

/// Oracle-view classifiers followed by the OMIB pipeline.
Table1Result run_table1(const TrainTestSplit& data, const std::optional<BetaBounds>& bounds,
                        const Table1Options& options, const std::string& dataset_name,
                        std::ostream* log = nullptr);
void write_table1_csv(const std::vector<Table1Row>& rows, std::ostream& out);

/// Mean over every logged r value of every trajectory.
double mean_r(const RunRecord& record);

/// Full command line (argv[0] excluded). Returns the exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace omib
