#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace sipred::detail {

using ordered_json = nlohmann::ordered_json;

/// JSON has no infinities; they travel as the strings "inf" and "-inf".
inline ordered_json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline ordered_json numbers(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

/// Throws std::invalid_argument on anything but a number or "inf"/"-inf".
template <class J>
double read_number(const J& j) {
  if (j.is_number()) return j.template get<double>();
  if (j.is_string()) {
    const auto s = j.template get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw std::invalid_argument("expected a number");
}

template <class J>
std::vector<double> read_numbers(const J& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(read_number(x));
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace sipred::detail
