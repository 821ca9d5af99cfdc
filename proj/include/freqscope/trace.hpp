#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "freqscope/error.hpp"

namespace freqscope {

// Fixed-interval sequence of frequency readings (kHz).
struct FrequencyTrace {
  std::vector<std::int64_t> samples;
  int interval_ms = 10;
  std::optional<std::string> label;
  std::string device;
  std::int64_t start_index = 0;

  void validate() const {
    if (samples.empty()) throw InvalidArgument("trace has no samples");
    if (interval_ms < 1) throw InvalidArgument("trace interval_ms must be >= 1");
    for (auto s : samples) {
      if (s < 0) throw InvalidArgument("trace has a negative sample");
    }
  }

  std::size_t size() const { return samples.size(); }
  std::int64_t duration_ms() const {
    return static_cast<std::int64_t>(samples.size()) * interval_ms;
  }

  bool operator==(const FrequencyTrace&) const = default;
};

// Percent-encoding keeps labels on one line and free of the ',' '=' and '#'
// characters the format uses. Everything outside [A-Za-z0-9._~-] is escaped,
// so the result is also a safe directory name.
inline std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    const bool plain = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                       (c >= '0' && c <= '9') || c == '.' || c == '_' ||
                       c == '~' || c == '-';
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

inline std::optional<std::string> percent_decode(std::string_view s) {
  auto hexval = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 2 >= s.size()) return std::nullopt;
    const int hi = hexval(s[i + 1]);
    const int lo = hexval(s[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

namespace detail {

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T value{};
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

inline constexpr std::string_view kTraceMagic = "#ftrace v1";

// Parses the line-oriented trace format. Body lines are either `index,freq_khz`
// or a bare `freq_khz`; the magic line is optional.
inline FrequencyTrace parse_trace(std::string_view text) {
  FrequencyTrace t;
  bool have_interval = false;
  bool in_body = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (!line.empty() && line.front() == '#') {
      if (in_body) {
        throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                         "header line after samples");
      }
      if (line_no == 1 && line.rfind("#ftrace", 0) == 0) {
        if (line != kTraceMagic) {
          throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                           "unsupported trace version '" + std::string(line) + "'");
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                         "header line without key=value");
      }
      const auto key = line.substr(1, eq - 1);
      const auto value = line.substr(eq + 1);
      auto decoded = percent_decode(value);
      if (!decoded) {
        throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                         "bad percent-encoding in header value");
      }
      if (key == "interval_ms") {
        auto v = detail::parse_int<int>(value);
        if (!v || *v < 1) {
          throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                           "interval_ms must be a positive integer");
        }
        t.interval_ms = *v;
        have_interval = true;
      } else if (key == "device") {
        t.device = *decoded;
      } else if (key == "label") {
        t.label = *decoded;
      } else if (key == "start_index") {
        auto v = detail::parse_int<std::int64_t>(value);
        if (!v || *v < 0) {
          throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                           "start_index must be a non-negative integer");
        }
        t.start_index = *v;
      } else {
        throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                         "unknown header key '" + std::string(key) + "'");
      }
      continue;
    }

    if (line.empty() && pos >= text.size()) break;  // trailing newline
    if (!have_interval) {
      throw ParseError(ParseErrorKind::kMalformedHeader, line_no,
                       "samples before interval_ms header");
    }
    in_body = true;
    std::string_view freq_text = line;
    const auto comma = line.find(',');
    if (comma != std::string_view::npos) {
      auto idx = detail::parse_int<std::int64_t>(line.substr(0, comma));
      if (!idx) {
        throw ParseError(ParseErrorKind::kNonNumericSample, line_no,
                         "non-numeric sample index");
      }
      const auto expected = t.start_index + static_cast<std::int64_t>(t.samples.size());
      if (*idx != expected) {
        throw ParseError(ParseErrorKind::kBadIndex, line_no,
                         "expected index " + std::to_string(expected) + ", got " +
                             std::to_string(*idx));
      }
      freq_text = line.substr(comma + 1);
    }
    auto freq = detail::parse_int<std::int64_t>(freq_text);
    if (!freq || *freq < 0) {
      throw ParseError(ParseErrorKind::kNonNumericSample, line_no,
                       "sample '" + std::string(freq_text) +
                           "' is not a non-negative integer");
    }
    t.samples.push_back(*freq);
  }
  if (!have_interval) {
    throw ParseError(ParseErrorKind::kMalformedHeader, line_no + 1,
                     "missing interval_ms header");
  }
  if (t.samples.empty()) {
    throw ParseError(ParseErrorKind::kEmptyBody, line_no + 1, "trace has no samples");
  }
  return t;
}

inline std::string format_trace(const FrequencyTrace& t) {
  std::string out;
  out.reserve(64 + t.samples.size() * 12);
  out += kTraceMagic;
  out += "\n#interval_ms=" + std::to_string(t.interval_ms);
  out += "\n#device=" + percent_encode(t.device);
  if (t.label) out += "\n#label=" + percent_encode(*t.label);
  if (t.start_index != 0) out += "\n#start_index=" + std::to_string(t.start_index);
  out += '\n';
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    out += std::to_string(t.start_index + static_cast<std::int64_t>(i));
    out += ',';
    out += std::to_string(t.samples[i]);
    out += '\n';
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("short write to '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace '" + path.string() + "': " + ec.message());
  }
}

inline FrequencyTrace load_trace(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_trace(text);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), e.line(), path.string() + ": " + e.detail());
  }
}

inline void save_trace(const FrequencyTrace& t, const std::filesystem::path& path) {
  t.validate();
  write_file_atomic(path, format_trace(t));
}

}  // namespace freqscope
