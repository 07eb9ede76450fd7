// Copyright 2026 The synctrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "synctrack/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "synctrack/errors.hpp"

namespace synctrack {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const KeyValue& kv, const std::string& what) {
  throw ConfigError("invalid value '" + kv.value + "' for key '" + kv.key + "' (line " +
                    std::to_string(kv.line) + "): expected " + what);
}

template <typename N>
bool parse_number(const std::string& s, N& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<KeyValue> parse_key_values(const std::string& text) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(raw.substr(0, raw.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value' (line " + std::to_string(line) + ")");
    }
    KeyValue kv{trim(body.substr(0, eq)), trim(body.substr(eq + 1)), line};
    if (kv.key.empty() || kv.value.empty()) {
      throw ConfigError("expected 'key = value' (line " + std::to_string(line) + ")");
    }
    if (!seen.insert(kv.key).second) {
      throw ConfigError("duplicate key '" + kv.key + "' (line " + std::to_string(line) + ")");
    }
    out.push_back(std::move(kv));
  }
  return out;
}

double parse_real(const KeyValue& kv) {
  double v = 0.0;
  if (!parse_number(kv.value, v) || !std::isfinite(v)) bad_value(kv, "a finite real number");
  return v;
}

std::size_t parse_count(const KeyValue& kv) {
  std::size_t v = 0;
  if (!parse_number(kv.value, v)) bad_value(kv, "a non-negative integer");
  return v;
}

std::uint64_t parse_u64(const KeyValue& kv) {
  std::uint64_t v = 0;
  if (!parse_number(kv.value, v)) bad_value(kv, "an unsigned 64-bit integer");
  return v;
}

std::vector<std::size_t> parse_count_list(const KeyValue& kv) {
  std::vector<std::size_t> out;
  std::istringstream in(kv.value);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t v = 0;
    if (!parse_number(trim(item), v)) bad_value(kv, "comma-separated integers");
    out.push_back(v);
  }
  if (out.empty()) bad_value(kv, "comma-separated integers");
  return out;
}

std::pair<double, double> parse_real_pair(const KeyValue& kv) {
  const auto colon = kv.value.find(':', 1);
  double lo = 0.0, hi = 0.0;
  if (colon == std::string::npos || !parse_number(trim(kv.value.substr(0, colon)), lo) ||
      !parse_number(trim(kv.value.substr(colon + 1)), hi)) {
    bad_value(kv, "a 'lo:hi' pair");
  }
  if (!(lo <= hi)) bad_value(kv, "lo <= hi");
  return {lo, hi};
}

void throw_unknown_key(const KeyValue& kv) {
  throw ConfigError("unknown key '" + kv.key + "' (line " + std::to_string(kv.line) + ")");
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a combination of both inputs.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace synctrack
