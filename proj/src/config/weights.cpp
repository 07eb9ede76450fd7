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

#include "synctrack/weights.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synctrack/errors.hpp"

namespace synctrack {

namespace {

constexpr const char* kHeader = "SYNCTRACK-WEIGHTS v1";

std::string shape_text(const nn::Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

}  // namespace

template <typename T>
void save_weights(const std::filesystem::path& path, const nn::ParameterSet<T>& params) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << kHeader << '\n';
  char buf[64];
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    out << p.name << ' ' << shape_text(p.tensor.shape());
    for (const T v : p.tensor.values()) {
      const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      (void)ec;
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

template <typename T>
void load_weights(const std::filesystem::path& path, nn::ParameterSet<T>& params) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> void {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  std::string line;
  ++line_no;
  if (!std::getline(in, line) || line != kHeader) {
    fail("expected header '" + std::string(kHeader) + "'");
  }
  // Staged so a bad file leaves `params` untouched.
  std::map<std::string, std::vector<T>> staged;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, shape;
    fields >> name >> shape;
    nn::Parameter<T>* p = params.find(name);
    if (p == nullptr) fail("unknown parameter '" + name + "'");
    if (staged.count(name)) fail("parameter '" + name + "' repeated");
    if (shape != shape_text(p->tensor.shape())) {
      fail("parameter '" + name + "' has shape " + shape + ", expected " +
           shape_text(p->tensor.shape()));
    }
    std::vector<T>& values = staged[name];
    values.resize(p->tensor.numel());
    std::string tok;
    std::size_t k = 0;
    while (fields >> tok) {
      if (k == values.size()) fail("too many values for '" + name + "'");
      T v{};
      const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(v)) {
        fail("bad value '" + tok + "' for '" + name + "'");
      }
      values[k++] = v;
    }
    if (k != values.size()) fail("too few values for '" + name + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!staged.count(params[i].name)) {
      throw DataError(path.string() + ": missing parameter '" + params[i].name + "'");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<T>& v = staged[params[i].name];
    std::copy(v.begin(), v.end(), params[i].tensor.mutable_values().begin());
  }
}

template void save_weights<float>(const std::filesystem::path&, const nn::ParameterSet<float>&);
template void save_weights<double>(const std::filesystem::path&,
                                   const nn::ParameterSet<double>&);
template void load_weights<float>(const std::filesystem::path&, nn::ParameterSet<float>&);
template void load_weights<double>(const std::filesystem::path&, nn::ParameterSet<double>&);

}  // namespace synctrack
