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

#ifndef SYNCTRACK_WEIGHTS_HPP_
#define SYNCTRACK_WEIGHTS_HPP_

#include <filesystem>

#include "synctrack/nn/parameter.hpp"

namespace synctrack {

// Text format: the line `SYNCTRACK-WEIGHTS v1`, then one line per parameter
// (buffers included) as `name d0xd1x... v0 v1 ...` in registration order.
template <typename T>
void save_weights(const std::filesystem::path& path, const nn::ParameterSet<T>& params);

// Overwrites every parameter of `params`, which must already hold the same
// names and shapes. Throws DataError naming the file and line.
template <typename T>
void load_weights(const std::filesystem::path& path, nn::ParameterSet<T>& params);

}  // namespace synctrack

#endif  // SYNCTRACK_WEIGHTS_HPP_
