#pragma once

// Deterministic serialisation: JSON with sorted keys and 17 significant
// digits, CSV with a header row. Both are independent of the C locale.

#include <oscillax/error.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace oscillax {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), end);
}

namespace detail {

inline void json_string(const std::string& s, std::string& out) { out += nlohmann::json(s).dump(); }

inline void json_value(const nlohmann::json& j, std::string& out, int indent, int depth) {
  auto newline = [&](int d) {
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {  // std::map storage: keys come out sorted
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        json_string(key, out);
        out += ": ";
        json_value(value, out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& value : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        json_value(value, out, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      // JSON has no non-finite numbers; keep them readable as strings.
      if (std::isfinite(v)) {
        out += format_double(v);
      } else {
        json_string(format_double(v), out);
      }
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string dump_json(const nlohmann::json& j, int indent = 2) {
  std::string out;
  detail::json_value(j, out, indent, 0);
  out += '\n';
  return out;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("Table::add: row width differs from header");
    rows.push_back(std::move(row));
  }
};

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

/// Column-wise constructor; all columns must have equal length.
inline Table make_table(std::vector<std::string> names, const std::vector<const std::vector<double>*>& columns) {
  if (names.size() != columns.size() || columns.empty()) throw std::invalid_argument("make_table: name/column mismatch");
  Table t;
  t.columns = std::move(names);
  const std::size_t n = columns.front()->size();
  for (const auto* c : columns) {
    if (c->size() != n) throw std::invalid_argument("make_table: columns differ in length");
  }
  t.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    row.reserve(columns.size());
    for (const auto* c : columns) row.push_back((*c)[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out.flush()) throw Error("write failed for " + path.string());
}

}  // namespace oscillax
