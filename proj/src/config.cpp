#include "modcausal/config.hpp"

#include <fstream>
#include <stdexcept>

#include "csv.hpp"
#include "modcausal/ingestion.hpp"

namespace modcausal {

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& name) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto t = csv::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(name, line_no, "expected key = value");
    const auto key = csv::trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(name, line_no, "empty key");
    cfg.values_[std::string(key)] = std::string(csv::trim(t.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse(in, path);
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_[key] = true;
  return it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  try {
    return csv::parse_double(*s);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': invalid number '" + *s + "'");
  }
}

std::optional<long> KeyValueConfig::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  try {
    return csv::parse_long(*s);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': invalid integer '" + *s + "'");
  }
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "1" || *s == "true" || *s == "yes" || *s == "on") return true;
  if (*s == "0" || *s == "false" || *s == "no" || *s == "off") return false;
  throw std::invalid_argument("config key '" + key + "': invalid boolean '" + *s + "'");
}

std::optional<std::vector<double>> KeyValueConfig::get_vector(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::vector<double> out;
  try {
    for (auto tok : csv::split(*s)) out.push_back(csv::parse_double(tok));
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': invalid number list '" + *s + "'");
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace modcausal
