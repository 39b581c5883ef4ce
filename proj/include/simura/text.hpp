#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace simura {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Collapses any whitespace run to a single space and trims the ends.
inline std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = true;  // suppress leading spaces
  for (char c : s) {
    if (is_space(c)) {
      in_ws = true;
    } else {
      if (in_ws && !out.empty()) out.push_back(' ');
      out.push_back(c);
      in_ws = false;
    }
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= s.size()) {
    size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

inline size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  size_t n = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// Replaces every "{name}" placeholder with its value. Unknown placeholders
// are left untouched so template drift is visible in goldens.
inline std::string fill_template(std::string_view tmpl,
                                 const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  size_t pos = 0;
  while (pos < tmpl.size()) {
    size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    std::string key(tmpl.substr(open + 1, close - open - 1));
    auto it = values.find(key);
    if (it != values.end()) {
      out.append(it->second);
      pos = close + 1;
    } else {
      out.push_back('{');
      pos = open + 1;
    }
  }
  return out;
}

// Shortest decimal form that round-trips through parsing. Integral values
// render without a decimal point ("500", not "500.0").
inline std::string format_number(double v) {
  if (v == static_cast<int64_t>(v) && v >= -1e15 && v <= 1e15) {
    return std::to_string(static_cast<int64_t>(v));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Keeps the longest prefix of whole lines within the byte budget.
inline std::string truncate_lines(std::string_view s, size_t budget) {
  if (s.size() <= budget) return std::string(s);
  size_t cut = s.rfind('\n', budget);
  if (cut == std::string_view::npos) cut = budget;
  return std::string(s.substr(0, cut));
}

}  // namespace simura
