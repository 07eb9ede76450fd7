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

#ifndef SYNCTRACK_KEYVALUE_HPP_
#define SYNCTRACK_KEYVALUE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace synctrack {

// One `key = value` line; `line` is 1-based.
struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Splits text into key/value lines. '#' starts a comment; blank lines are
// skipped; surrounding whitespace is trimmed. Throws ConfigError on a line
// without '=' or with an empty key or value, and on a repeated key.
std::vector<KeyValue> parse_key_values(const std::string& text);

// Value parsers; all throw ConfigError naming the key and line.
double parse_real(const KeyValue& kv);
std::size_t parse_count(const KeyValue& kv);
std::uint64_t parse_u64(const KeyValue& kv);
// Comma-separated list of counts, e.g. "32,64,128".
std::vector<std::size_t> parse_count_list(const KeyValue& kv);
// "lo:hi" pair of reals.
std::pair<double, double> parse_real_pair(const KeyValue& kv);

[[noreturn]] void throw_unknown_key(const KeyValue& kv);

// Shortest text that reads back to the same double.
std::string format_real(double v);

// Decorrelated child seed for stream `index` of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace synctrack

#endif  // SYNCTRACK_KEYVALUE_HPP_
