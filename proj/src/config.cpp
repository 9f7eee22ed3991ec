#include "kg/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kg/errors.hpp"

namespace kg {

namespace {
std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}
}  // namespace

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw InvalidArgument("config: bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw InvalidArgument("config: empty key at line " + std::to_string(lineno));
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value) {
  const std::size_t dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw InvalidArgument("config override must be section.key, got '" + dotted_key + "'");
  sections_[dotted_key.substr(0, dot)][dotted_key.substr(dot + 1)] = trim(value);
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::string ExperimentConfig::get_string(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end() || !it->second.count(key))
    throw InvalidArgument("config: missing required key " + section + "." + key);
  return it->second.at(key);
}

std::string ExperimentConfig::get_string_or(const std::string& section, const std::string& key,
                                            const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

long ExperimentConfig::get_int(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("config: " + section + "." + key + " must be an integer, got '" + v +
                          "'");
  }
}

long ExperimentConfig::get_int_or(const std::string& section, const std::string& key,
                                  long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

double ExperimentConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("config: " + section + "." + key + " must be a number, got '" + v + "'");
  }
}

double ExperimentConfig::get_double_or(const std::string& section, const std::string& key,
                                       double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

bool ExperimentConfig::get_bool_or(const std::string& section, const std::string& key,
                                   bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config: " + section + "." + key + " must be a boolean, got '" + v + "'");
}

cplx parse_complex(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw InvalidArgument("empty complex literal");
  if (s.back() != 'i') {
    std::size_t pos = 0;
    const double re = std::stod(s, &pos);
    if (pos != s.size()) throw InvalidArgument("bad complex literal '" + s + "'");
    return cplx(re, 0.0);
  }
  // strip trailing i, find the split between real and imaginary parts
  std::string body = s.substr(0, s.size() - 1);
  // pure imaginary: "2i", "-0.5i", "i", "-i"
  std::size_t split = std::string::npos;
  for (std::size_t i = 1; i < body.size(); ++i) {
    if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E')
      split = i;
  }
  if (split == std::string::npos) {
    if (body.empty() || body == "-" || body == "+")
      return cplx(0.0, body == "-" ? -1.0 : 1.0);
    std::size_t pos = 0;
    const double im = std::stod(body, &pos);
    if (pos != body.size()) throw InvalidArgument("bad complex literal '" + s + "'");
    return cplx(0.0, im);
  }
  std::size_t pos = 0;
  const double re = std::stod(body.substr(0, split), &pos);
  std::string imtxt = body.substr(split);
  if (imtxt == "+") imtxt = "1";
  if (imtxt == "-") imtxt = "-1";
  std::size_t pos2 = 0;
  const double im = std::stod(imtxt, &pos2);
  if (pos != split || pos2 != imtxt.size())
    throw InvalidArgument("bad complex literal '" + s + "'");
  return cplx(re, im);
}

cplx ExperimentConfig::get_complex(const std::string& section, const std::string& key) const {
  try {
    return parse_complex(get_string(section, key));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("config: " + section + "." + key + ": " + e.what());
  }
}

std::vector<cplx> ExperimentConfig::get_complex_list(const std::string& section,
                                                     const std::string& key) const {
  const std::string v = get_string(section, key);
  std::vector<cplx> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) continue;
    try {
      out.push_back(parse_complex(cur));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config: " + section + "." + key + ": " + e.what());
    }
  }
  if (out.empty()) throw InvalidArgument("config: " + section + "." + key + " is empty");
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  for (const auto& [section, kv] : sections_) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
  }
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
  // FNV-1a 64
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace kg
