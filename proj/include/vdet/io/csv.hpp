#pragma once

// Minimal CSV reading and writing. Fields are comma separated and never
// quoted in the formats used here; errors carry file:line context.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace vdet::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Days since 1970-01-01 of a proleptic Gregorian date.
inline long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw ParseError(path + ": cannot open file");
    std::string header;
    while (std::getline(in_, header)) {
      ++line_;
      if (!is_blank(header)) break;
    }
    if (is_blank(header)) throw ParseError(path + ": missing header line");
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    const auto names = split_fields(header);
    for (std::size_t i = 0; i < names.size(); ++i) columns_[std::string(names[i])] = i;
    width_ = names.size();
  }

  bool has(const std::string& name) const { return columns_.count(name) != 0; }

  std::size_t column(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end()) throw ParseError(path_ + ":1: missing column '" + name + "'");
    return it->second;
  }

  /// Advances to the next non-blank record; false at end of file.
  bool next() {
    while (std::getline(in_, buf_)) {
      ++line_;
      if (is_blank(buf_)) continue;
      fields_ = split_fields(buf_);
      if (fields_.size() != width_)
        fail("expected " + std::to_string(width_) + " fields, found " + std::to_string(fields_.size()));
      return true;
    }
    return false;
  }

  std::string_view field(std::size_t i) const { return fields_[i]; }
  std::string str(std::size_t i) const { return std::string(fields_[i]); }

  double number(std::size_t i) const {
    const auto f = fields_[i];
    double v = 0.0;
    const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
    if (r.ec != std::errc() || r.ptr != f.data() + f.size() || !std::isfinite(v))
      fail("invalid number '" + std::string(f) + "'");
    return v;
  }

  long long integer(std::size_t i) const {
    const auto f = fields_[i];
    long long v = 0;
    const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
    if (r.ec != std::errc() || r.ptr != f.data() + f.size()) fail("invalid integer '" + std::string(f) + "'");
    return v;
  }

  /// Epoch seconds, or ISO-8601 UTC such as 2021-08-27T05:00:00Z.
  double timestamp(std::size_t i) const {
    const auto f = fields_[i];
    if (f.find('-', 1) == std::string_view::npos) return number(i);
    int Y = 0, M = 0, D = 0, h = 0, m = 0;
    double s = 0.0;
    char tail[8] = {0};
    const std::string text(f);
    const int got = std::sscanf(text.c_str(), "%d-%d-%d%*[T ]%d:%d:%lf%7s", &Y, &M, &D, &h, &m, &s, tail);
    const std::string_view tz(tail);
    if (got < 6 || M < 1 || M > 12 || D < 1 || D > 31 || h > 23 || m > 59 || s >= 61.0 || !(tz.empty() || tz == "Z" || tz == "+00:00"))
      fail("invalid timestamp '" + text + "' (expected epoch seconds or ISO-8601 UTC)");
    return static_cast<double>(days_from_civil(Y, static_cast<unsigned>(M), static_cast<unsigned>(D))) * 86400.0 + h * 3600.0 +
           m * 60.0 + s;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(path_ + ":" + std::to_string(line_) + ": " + msg); }

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  static bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

  std::string path_;
  std::ifstream in_;
  std::map<std::string, std::size_t> columns_;
  std::size_t width_ = 0;
  std::size_t line_ = 0;
  std::string buf_;
  std::vector<std::string_view> fields_;
};

/// Shortest text that round-trips the double exactly.
inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error(path + ": cannot open for writing");
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error(path + ": cannot open for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    out_ << '\n';
  }

  std::ostream& stream() { return out_; }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error(path_ + ": write failed");
  }

 private:
  template <class T>
  void put(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) out_ << fmt(v);
    else out_ << v;
  }

  std::string path_;
  std::ofstream out_;
};

}  // namespace vdet::io
