#include "clot/config_file.hpp"

#include <fstream>
#include <sstream>

namespace clot {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw validation_error("config key '" + key + "': not a number: " + v);
  }
  if (pos != v.size()) {
    throw validation_error("config key '" + key + "': trailing characters: " + v);
  }
  return d;
}

}  // namespace

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

ConfigDoc ConfigDoc::parse_string(const std::string& text) {
  ConfigDoc doc;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw validation_error("config line " + std::to_string(lineno) +
                             ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw validation_error("config line " + std::to_string(lineno) + ": empty key");
    }
    if (doc.values_.count(key) > 0) {
      throw validation_error("config: duplicate key '" + key + "'");
    }
    doc.values_[key] = value;
  }
  return doc;
}

void ConfigDoc::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string ConfigDoc::take(const std::string& key) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? std::string() : it->second;
}

std::string ConfigDoc::get_string(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string ConfigDoc::require_string(const std::string& key) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw validation_error("config: missing required key '" + key + "'");
  }
  return it->second;
}

double ConfigDoc::get_double(const std::string& key, double fallback) {
  const std::string v = take(key);
  return v.empty() ? fallback : parse_double(key, v);
}

int ConfigDoc::get_int(const std::string& key, int fallback) {
  const std::string v = take(key);
  if (v.empty()) return fallback;
  const double d = parse_double(key, v);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) {
    throw validation_error("config key '" + key + "': expected an integer: " + v);
  }
  return i;
}

bool ConfigDoc::get_bool(const std::string& key, bool fallback) {
  const std::string v = take(key);
  if (v.empty()) return fallback;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw validation_error("config key '" + key + "': expected a boolean: " + v);
}

std::vector<double> ConfigDoc::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) {
  const std::string v = take(key);
  if (v.empty()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<int> ConfigDoc::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) {
  const std::string v = take(key);
  if (v.empty()) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(v)) {
    const double d = parse_double(key, item);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) {
      throw validation_error("config key '" + key + "': expected integers: " + v);
    }
    out.push_back(i);
  }
  return out;
}

void ConfigDoc::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key) == 0) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) {
    throw validation_error("config: unknown keys: " + unknown);
  }
}

}  // namespace clot
