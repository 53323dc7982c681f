#include "tcd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tcd/error.hpp"

namespace tcd {

namespace {

std::string real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

double to_real(std::string_view key, std::string_view value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw config_error(std::string(key), "expected a number, got '" + std::string(value) + "'");
  return v;
}

std::uint64_t to_count(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw config_error(std::string(key),
                       "expected a non-negative integer, got '" + std::string(value) + "'");
  return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const DecodeConfig& c) {
  return {
      {"W_min_ms", real(c.W_min_ms)},
      {"W_max_ms", real(c.W_max_ms)},
      {"lambda_min", real(c.lambda_min)},
      {"lambda_max", real(c.lambda_max)},
      {"K_orig", std::to_string(c.K_orig)},
      {"K_blur", std::to_string(c.K_blur)},
      {"K_ent", std::to_string(c.K_ent)},
      {"gamma_gate", real(c.gamma_gate)},
      {"alpha", real(c.alpha)},
      {"tau", real(c.tau)},
      {"L_attn", std::to_string(c.L_attn)},
      {"epsilon", real(c.epsilon)},
      {"strategy", std::string(to_string(c.strategy))},
      {"slow_path", std::string(to_string(c.slow_path))},
      {"noise_sigma", real(c.noise_sigma)},
      {"seed", std::to_string(c.seed)},
  };
}

std::string serialize_config(const DecodeConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + "=" + value + "\n";
  return out;
}

void apply_setting(DecodeConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  const std::string k(key);
  if (key == "W_min_ms") c.W_min_ms = to_real(key, value);
  else if (key == "W_max_ms") c.W_max_ms = to_real(key, value);
  else if (key == "lambda_min") c.lambda_min = to_real(key, value);
  else if (key == "lambda_max") c.lambda_max = to_real(key, value);
  else if (key == "K_orig") c.K_orig = to_count(key, value);
  else if (key == "K_blur") c.K_blur = to_count(key, value);
  else if (key == "K_ent") c.K_ent = to_count(key, value);
  else if (key == "gamma_gate") c.gamma_gate = to_real(key, value);
  else if (key == "alpha") c.alpha = to_real(key, value);
  else if (key == "tau") c.tau = to_real(key, value);
  else if (key == "L_attn") c.L_attn = to_count(key, value);
  else if (key == "epsilon") c.epsilon = to_real(key, value);
  else if (key == "strategy") c.strategy = parse_strategy(value);
  else if (key == "slow_path") c.slow_path = parse_slow_path(value);
  else if (key == "noise_sigma") c.noise_sigma = to_real(key, value);
  else if (key == "seed") c.seed = to_count(key, value);
  else throw config_error(k, "unknown configuration key");
}

DecodeConfig parse_config(std::string_view text, DecodeConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    auto line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw config_error("", "line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

DecodeConfig load_config(const std::optional<std::string>& path,
                         const std::vector<std::string>& overrides) {
  DecodeConfig config;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw config_error("", "cannot open config file '" + *path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    config = parse_config(buf.str(), config);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw config_error(item, "override must be key=value");
    apply_setting(config, std::string_view(item).substr(0, eq),
                  std::string_view(item).substr(eq + 1));
  }
  config.validate();
  return config;
}

}  // namespace tcd
