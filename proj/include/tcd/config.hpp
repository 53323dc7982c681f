#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcd/fusion.hpp"

namespace tcd {

/// Ordered (key, value) pairs; keys follow the hyperparameter symbols
/// (W_min_ms, lambda_min, K_orig, gamma_gate, ...). Reals use the shortest
/// round-trip representation.
std::vector<std::pair<std::string, std::string>> config_entries(const DecodeConfig& config);
std::string serialize_config(const DecodeConfig& config);

/// Sets one key. Unknown keys and malformed values raise config_error
/// carrying the key name. No cross-field validation.
void apply_setting(DecodeConfig& config, std::string_view key, std::string_view value);

/// Flat "key=value" text, '#' comments, blank lines ignored.
DecodeConfig parse_config(std::string_view text, DecodeConfig base = {});

/// Defaults, then the optional file, then each "key=value" override in
/// order; the result is validated.
DecodeConfig load_config(const std::optional<std::string>& path,
                         const std::vector<std::string>& overrides = {});

}  // namespace tcd
