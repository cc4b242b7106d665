#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "omib/synth.hpp"

namespace omib {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

void write_doubles(std::ofstream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t count, const std::string& what) {
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    throw std::runtime_error("dataset file truncated while reading " + what);
  }
  return values;
}

}  // namespace

void write_dataset(const SimDataset& ds, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path data_path = dir / (name + ".f64");
  const std::filesystem::path meta_path = dir / (name + ".json");

  json meta;
  meta["schema_version"] = kDatasetSchemaVersion;
  meta["kind"] = "omib-dataset";
  meta["preset"] = ds.preset;
  meta["seed"] = ds.seed;
  meta["train_fraction"] = ds.train_fraction;
  meta["n"] = ds.size();
  meta["modalities"] = ds.modalities();
  json matrices = json::array();
  std::size_t offset = 0;
  auto add_matrix = [&](const std::string& label, std::size_t rows, std::size_t cols) {
    matrices.push_back({{"name", label}, {"rows", rows}, {"cols", cols}, {"offset", offset}});
    offset += rows * cols;
  };
  for (std::size_t m = 0; m < ds.modalities(); ++m) {
    add_matrix("x" + std::to_string(m + 1), ds.views[m].rows, ds.views[m].cols);
  }
  add_matrix("y", ds.size(), 1);
  add_matrix("delta", ds.delta.size(), 1);
  meta["matrices"] = matrices;
  json blocks = json::array();
  for (const Block& b : ds.blocks) {
    json offsets = json::array();
    for (const auto& o : b.offsets) offsets.push_back(o ? json(*o) : json(nullptr));
    blocks.push_back(
        {{"name", b.name}, {"width", b.width}, {"relevant", b.relevant}, {"offsets", offsets}});
  }
  meta["blocks"] = blocks;
  meta["data_file"] = data_path.filename().string();

  std::ofstream data(data_path, std::ios::binary | std::ios::trunc);
  if (!data) throw std::runtime_error("cannot write " + data_path.string());
  for (const Matrix& v : ds.views) write_doubles(data, v.values);
  std::vector<double> labels(ds.labels.begin(), ds.labels.end());
  write_doubles(data, labels);
  write_doubles(data, ds.delta);
  if (!data) throw std::runtime_error("write failed for " + data_path.string());

  std::ofstream meta_out(meta_path, std::ios::trunc);
  if (!meta_out) throw std::runtime_error("cannot write " + meta_path.string());
  meta_out << meta.dump(2) << '\n';
}

SimDataset read_dataset(const std::filesystem::path& path) {
  std::filesystem::path meta_path = path;
  if (meta_path.extension() != ".json") meta_path += ".json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("dataset not found: " + meta_path.string());
  json meta = json::parse(meta_in);
  if (meta.value("schema_version", -1) != kDatasetSchemaVersion) {
    throw std::runtime_error("unsupported dataset schema in " + meta_path.string());
  }

  SimDataset ds;
  ds.preset = meta.at("preset").get<std::string>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.train_fraction = meta.at("train_fraction").get<double>();
  const auto n = meta.at("n").get<std::size_t>();
  const auto modalities = meta.at("modalities").get<std::size_t>();
  for (const json& b : meta.at("blocks")) {
    Block blk{b.at("name").get<std::string>(), b.at("width").get<std::size_t>(),
              b.at("relevant").get<bool>(), {}};
    for (const json& o : b.at("offsets")) {
      blk.offsets.push_back(o.is_null() ? std::nullopt : std::optional<std::size_t>(o.get<std::size_t>()));
    }
    if (blk.offsets.size() != modalities) {
      throw std::runtime_error("block '" + blk.name + "' lists the wrong number of offsets");
    }
    ds.blocks.push_back(std::move(blk));
  }

  const std::filesystem::path data_path = meta_path.parent_path() / meta.at("data_file").get<std::string>();
  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw std::runtime_error("dataset payload not found: " + data_path.string());
  for (const json& mat : meta.at("matrices")) {
    const std::string label = mat.at("name").get<std::string>();
    const auto rows = mat.at("rows").get<std::size_t>();
    const auto cols = mat.at("cols").get<std::size_t>();
    std::vector<double> values = read_doubles(data, rows * cols, label);
    if (label == "y") {
      if (rows != n) throw std::runtime_error("label count does not match n");
      ds.labels.reserve(rows);
      for (double v : values) ds.labels.push_back(static_cast<std::size_t>(v));
    } else if (label == "delta") {
      ds.delta = std::move(values);
    } else {
      if (rows != n) throw std::runtime_error("matrix " + label + " has the wrong row count");
      Matrix m(rows, cols);
      m.values = std::move(values);
      ds.views.push_back(std::move(m));
    }
  }
  if (ds.views.size() != modalities) throw std::runtime_error("dataset view count mismatch");
  ds.sample_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.sample_ids[i] = i;
  return ds;
}

}  // namespace omib
