#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kg/grid.hpp"

namespace kg {

// Flat typed key-value configuration with [section] headers. Unknown keys are
// tolerated at parse time; typed getters validate on access and name the
// offending section.key in errors.
class ExperimentConfig {
 public:
  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_string(const std::string& text);

  void set(const std::string& dotted_key, const std::string& value);
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int_or(const std::string& section, const std::string& key, long fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
  cplx get_complex(const std::string& section, const std::string& key) const;
  std::vector<cplx> get_complex_list(const std::string& section, const std::string& key) const;

  // Canonical serialization (sorted sections and keys) and its stable digest.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// "a", "2i", "1+0.5i", "-5", "3-0.5i"
cplx parse_complex(const std::string& text);

}  // namespace kg
