// SPDX-License-Identifier: Apache-2.0

#include "segsort/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace segsort {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(value) + "'");
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "num_clusters") cfg.num_clusters = parse_number<std::size_t>(key, value);
  else if (key == "embedding_dim") cfg.embedding_dim = parse_number<std::size_t>(key, value);
  else if (key == "kappa") cfg.kappa = parse_number<double>(key, value);
  else if (key == "em_iters") cfg.em_iters = parse_number<std::size_t>(key, value);
  else if (key == "coord_weight") cfg.coord_weight = parse_number<double>(key, value);
  else if (key == "bank_depth") cfg.bank_depth = parse_number<std::size_t>(key, value);
  else if (key == "knn") cfg.knn = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, value);
  else if (key == "iterations") cfg.iterations = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "hidden_units") cfg.hidden_units = parse_number<std::size_t>(key, value);
  else if (key == "split_components") cfg.split_components = parse_bool(key, value);
  else if (key == "serial") cfg.serial = parse_bool(key, value);
  else throw ConfigError("unknown config key: " + std::string(key));
}

void parse_config(TrainConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void load_config(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  parse_config(cfg, buffer.str());
}

std::string format_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "num_clusters=" << cfg.num_clusters << '\n'
      << "embedding_dim=" << cfg.embedding_dim << '\n'
      << "kappa=" << cfg.kappa << '\n'
      << "em_iters=" << cfg.em_iters << '\n'
      << "coord_weight=" << cfg.coord_weight << '\n'
      << "bank_depth=" << cfg.bank_depth << '\n'
      << "knn=" << cfg.knn << '\n'
      << "learning_rate=" << cfg.learning_rate << '\n'
      << "iterations=" << cfg.iterations << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "seed=" << cfg.seed << '\n'
      << "hidden_units=" << cfg.hidden_units << '\n'
      << "split_components=" << (cfg.split_components ? 1 : 0) << '\n'
      << "serial=" << (cfg.serial ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace segsort
