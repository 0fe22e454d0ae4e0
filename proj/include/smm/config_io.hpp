#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smm/model_config.hpp"

namespace smm {

// Settings are addressed by dotted "section.key" names, e.g. "smm.D" or
// "cavity.kappa". The same names are used by configuration files (one JSON
// object per section) and by --set key=value on the command line.
void apply_setting(PhysicalConfig& cfg, std::string_view key, std::string_view value);
void apply_setting(PhysicalConfig& cfg, std::string_view key, const nlohmann::json& value);
std::vector<std::string> setting_keys();

// Parses "key=value".
void apply_assignment(PhysicalConfig& cfg, std::string_view assignment);

// {"preset": "fe8", "smm": {"D": 3.6e10}, "cavity": {"M": 2}, ...}
// The preset (default fe8) is loaded first, then every section key is applied.
PhysicalConfig config_from_json(const nlohmann::json& doc);
PhysicalConfig load_config_file(const std::filesystem::path& path);

// Resolved configuration: the raw settings plus every derived quantity.
nlohmann::json to_json(const PhysicalConfig& cfg);

} // namespace smm
