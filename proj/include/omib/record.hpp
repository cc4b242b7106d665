#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "omib/mine.hpp"
#include "omib/train.hpp"

namespace omib {

inline constexpr int kRunRecordSchemaVersion = 1;
inline constexpr int kBoundsSchemaVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const MineConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const BetaBounds& bounds);
nlohmann::json to_json(const EpochStats& stats);
/// Everything except wall time lives outside the "timing" object.
nlohmann::json to_json(const RunRecord& record);

BetaBounds bounds_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

/// `<stem>.json` (config, widths, SVDD center, parameter shapes) plus
/// `<stem>.f64` (parameters in order).
void save_model(const OmibModel& model, const std::filesystem::path& stem);
OmibModel load_model(const std::filesystem::path& stem);

}  // namespace omib
