// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value configuration. Blank lines and lines starting with '#' are
// skipped. Keys match the TrainConfig field names.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "segsort/types.hpp"

namespace segsort {

/// Sets one field; throws ConfigError on unknown keys or unparsable values.
void apply_config_entry(TrainConfig& cfg, std::string_view key, std::string_view value);

void parse_config(TrainConfig& cfg, std::string_view text);
void load_config(TrainConfig& cfg, const std::filesystem::path& path);

/// key=value lines for every field, in declaration order.
std::string format_config(const TrainConfig& cfg);

}  // namespace segsort
