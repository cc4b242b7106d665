#include "omib/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "omib/rng.hpp"

namespace omib {
namespace {

struct BlockSpec {
  std::string name;
  std::size_t width;
  bool relevant;
  std::vector<bool> observed;
};

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1), got " + std::to_string(f));
  }
}

// Draws every block i.i.d. N(0, 1) per sample: relevant blocks from one stream,
// superfluous blocks from another, so labels never depend on the latter.
SimDataset generate_blocks(const std::string& preset, std::uint64_t seed,
                           std::optional<std::uint64_t> superfluous_seed, std::size_t n,
                           double fraction, const std::vector<BlockSpec>& specs,
                           const std::vector<std::vector<std::string>>& layout) {
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  const std::size_t modalities = layout.size();

  SimDataset ds;
  ds.preset = preset;
  ds.seed = seed;
  ds.train_fraction = fraction;

  std::map<std::string, std::size_t> spec_index;
  for (std::size_t b = 0; b < specs.size(); ++b) {
    spec_index[specs[b].name] = b;
    ds.blocks.push_back({specs[b].name, specs[b].width, specs[b].relevant,
                         std::vector<std::optional<std::size_t>>(modalities)});
  }
  std::vector<std::size_t> widths(modalities, 0);
  for (std::size_t m = 0; m < modalities; ++m) {
    for (const std::string& name : layout[m]) {
      Block& blk = ds.blocks[spec_index.at(name)];
      blk.offsets[m] = widths[m];
      widths[m] += blk.width;
    }
    if (widths[m] == 0) {
      throw std::invalid_argument("modality " + std::to_string(m + 1) + " has no features");
    }
    ds.views.emplace_back(n, widths[m]);
  }

  Rng relevant_rng(derive_seed(seed, "relevant"));
  Rng superfluous_rng(superfluous_seed ? *superfluous_seed : derive_seed(seed, "superfluous"));
  Rng delta_rng(derive_seed(seed, "delta"));

  std::size_t relevant_width = 0;
  for (const Block& b : ds.blocks) {
    if (b.relevant) relevant_width += b.width;
  }
  if (relevant_width == 0) throw std::invalid_argument("labels need at least one relevant dimension");
  ds.delta.resize(relevant_width);
  delta_rng.fill_normal(ds.delta);

  ds.labels.resize(n);
  ds.sample_ids.resize(n);
  std::iota(ds.sample_ids.begin(), ds.sample_ids.end(), std::size_t{0});
  std::vector<double> draw;
  for (std::size_t i = 0; i < n; ++i) {
    double projection = 0.0;
    std::size_t delta_pos = 0;
    for (const Block& b : ds.blocks) {
      draw.resize(b.width);
      (b.relevant ? relevant_rng : superfluous_rng).fill_normal(draw);
      if (b.relevant) {
        for (std::size_t j = 0; j < b.width; ++j) projection += ds.delta[delta_pos + j] * draw[j];
        delta_pos += b.width;
      }
      for (std::size_t m = 0; m < modalities; ++m) {
        if (!b.offsets[m]) continue;
        std::copy(draw.begin(), draw.end(), ds.views[m].row(i).begin() + *b.offsets[m]);
      }
    }
    ds.labels[i] = projection > 0.0 ? 1 : 0;
  }
  return ds;
}

}  // namespace

Matrix Matrix::select_rows(std::span<const std::size_t> index) const {
  Matrix out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::span<const double> src = row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void SimConfig::validate() const {
  if (n == 0) throw std::invalid_argument("sim: n must be positive");
  if (d0 + d11 + d21 == 0) throw std::invalid_argument("sim: d0 + d11 + d21 must be >= 1");
  check_fraction(train_fraction);
}

SimConfig SimConfig::preset_named(const std::string& name) {
  SimConfig cfg;
  cfg.preset = name;
  if (name == "sim1") {
    cfg.d11 = 500;
    cfg.d21 = 100;
  } else if (name == "sim2") {
    cfg.d11 = 100;
    cfg.d21 = 500;
  } else if (name == "sim3") {
    cfg.d11 = 300;
    cfg.d21 = 300;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return cfg;
}

void Sim3Config::validate() const {
  if (n == 0) throw std::invalid_argument("sim3: n must be positive");
  if (a_all + 3 * a_pair + a_own[0] + a_own[1] + a_own[2] == 0) {
    throw std::invalid_argument("sim3: needs at least one relevant dimension");
  }
  check_fraction(train_fraction);
}

SimDataset generate_sim(const SimConfig& cfg) {
  cfg.validate();
  const std::vector<BlockSpec> specs = {
      {"a0", cfg.d0, true, {true, true}},    {"b0", cfg.d0p, false, {true, true}},
      {"a1", cfg.d11, true, {true, false}},  {"b1", cfg.d12, false, {true, false}},
      {"a2", cfg.d21, true, {false, true}},  {"b2", cfg.d22, false, {false, true}},
  };
  const std::vector<std::vector<std::string>> layout = {{"b0", "b1", "a0", "a1"},
                                                        {"b0", "b2", "a0", "a2"}};
  return generate_blocks(cfg.preset, cfg.seed, cfg.superfluous_seed, cfg.n, cfg.train_fraction,
                         specs, layout);
}

SimDataset generate_sim3(const Sim3Config& cfg) {
  cfg.validate();
  // Union order: all-shared, per-modality, then pairwise blocks.
  std::vector<BlockSpec> specs = {
      {"a00", cfg.a_all, true, {true, true, true}},
      {"b00", cfg.b_all, false, {true, true, true}},
  };
  for (std::size_t m = 0; m < 3; ++m) {
    const std::string tag = std::to_string(m + 1) + std::to_string(m + 1);
    std::vector<bool> obs(3, false);
    obs[m] = true;
    specs.push_back({"a" + tag, cfg.a_own[m], true, obs});
    specs.push_back({"b" + tag, cfg.b_own[m], false, obs});
  }
  const std::array<std::pair<std::size_t, std::size_t>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  for (auto [i, j] : pairs) {
    const std::string tag = std::to_string(i + 1) + std::to_string(j + 1);
    std::vector<bool> obs(3, false);
    obs[i] = obs[j] = true;
    specs.push_back({"a" + tag, cfg.a_pair, true, obs});
    specs.push_back({"b" + tag, cfg.b_pair, false, obs});
  }
  std::vector<std::vector<std::string>> layout(3);
  for (std::size_t m = 0; m < 3; ++m) {
    // Mirrors the two-modality layout: superfluous blocks first, then relevant.
    for (char kind : {'b', 'a'}) {
      layout[m].push_back(std::string(1, kind) + "00");
      for (auto [i, j] : pairs) {
        if (i == m || j == m) {
          layout[m].push_back(std::string(1, kind) + std::to_string(i + 1) + std::to_string(j + 1));
        }
      }
      layout[m].push_back(std::string(1, kind) + std::to_string(m + 1) + std::to_string(m + 1));
    }
  }
  return generate_blocks(cfg.preset, cfg.seed, cfg.superfluous_seed, cfg.n, cfg.train_fraction,
                         specs, layout);
}

const Block& SimDataset::block(const std::string& name) const {
  for (const Block& b : blocks) {
    if (b.name == name) return b;
  }
  throw std::invalid_argument("dataset has no block '" + name + "'");
}

SimDataset SimDataset::subset(std::span<const std::size_t> index) const {
  SimDataset out;
  out.preset = preset;
  out.seed = seed;
  out.train_fraction = train_fraction;
  out.delta = delta;
  out.blocks = blocks;
  for (const Matrix& v : views) out.views.push_back(v.select_rows(index));
  out.labels.reserve(index.size());
  out.sample_ids.reserve(index.size());
  for (std::size_t i : index) {
    out.labels.push_back(labels.at(i));
    out.sample_ids.push_back(sample_ids.at(i));
  }
  return out;
}

TrainTestSplit split_train_test(const SimDataset& ds, double fraction, std::uint64_t seed) {
  check_fraction(fraction);
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split: fraction " + std::to_string(fraction) + " of " +
                                std::to_string(n) + " samples leaves an empty split");
  }
  Rng rng(derive_seed(seed, "split"));
  std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + n_train);
  std::vector<std::size_t> test_idx(perm.begin() + n_train, perm.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

OracleView parse_oracle_view(const std::string& name) {
  if (name == "consistent-relevant") return OracleView::consistent_relevant;
  if (name == "specific-relevant") return OracleView::specific_relevant;
  if (name == "unimodal-1") return OracleView::unimodal1;
  if (name == "unimodal-2") return OracleView::unimodal2;
  if (name == "unimodal-3") return OracleView::unimodal3;
  if (name == "authentic-optimal") return OracleView::authentic_optimal;
  if (name == "union") return OracleView::union_all;
  throw std::invalid_argument("unknown oracle view '" + name + "'");
}

std::string oracle_view_name(OracleView view) {
  switch (view) {
    case OracleView::consistent_relevant:
      return "consistent-relevant";
    case OracleView::specific_relevant:
      return "specific-relevant";
    case OracleView::unimodal1:
      return "unimodal-1";
    case OracleView::unimodal2:
      return "unimodal-2";
    case OracleView::unimodal3:
      return "unimodal-3";
    case OracleView::authentic_optimal:
      return "authentic-optimal";
    case OracleView::union_all:
      return "union";
  }
  return "unknown";
}

Matrix assemble_blocks(const SimDataset& ds, std::span<const std::string> names) {
  std::size_t width = 0;
  std::vector<std::pair<const Block*, std::size_t>> sources;
  for (const std::string& name : names) {
    const Block& b = ds.block(name);
    std::size_t modality = ds.modalities();
    for (std::size_t m = 0; m < b.offsets.size(); ++m) {
      if (b.offsets[m]) {
        modality = m;
        break;
      }
    }
    if (modality == ds.modalities()) {
      throw std::invalid_argument("block '" + name + "' is not observed by any modality");
    }
    sources.emplace_back(&b, modality);
    width += b.width;
  }
  Matrix out(ds.size(), width);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto dst = out.row(i).begin();
    for (auto [b, m] : sources) {
      std::span<const double> src = ds.views[m].row(i).subspan(*b->offsets[m], b->width);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

Matrix oracle_feature_view(const SimDataset& ds, OracleView view) {
  auto unimodal = [&](std::size_t m) -> Matrix {
    if (m >= ds.modalities()) {
      throw std::invalid_argument("oracle view " + oracle_view_name(view) + " needs " +
                                  std::to_string(m + 1) + " modalities");
    }
    return ds.views[m];
  };
  std::vector<std::string> names;
  for (const Block& b : ds.blocks) {
    const bool shared_by_all =
        std::all_of(b.offsets.begin(), b.offsets.end(), [](const auto& o) { return o.has_value(); });
    bool take = false;
    switch (view) {
      case OracleView::consistent_relevant:
        take = b.relevant && shared_by_all;
        break;
      case OracleView::specific_relevant:
        take = b.relevant && !shared_by_all;
        break;
      case OracleView::authentic_optimal:
        take = b.relevant;
        break;
      case OracleView::union_all:
        take = true;
        break;
      case OracleView::unimodal1:
        return unimodal(0);
      case OracleView::unimodal2:
        return unimodal(1);
      case OracleView::unimodal3:
        return unimodal(2);
    }
    if (take && b.width > 0) names.push_back(b.name);
  }
  if (names.empty()) {
    throw std::invalid_argument("oracle view " + oracle_view_name(view) + " selects no columns");
  }
  return assemble_blocks(ds, names);
}

}  // namespace omib
