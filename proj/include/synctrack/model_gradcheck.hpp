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

#ifndef SYNCTRACK_MODEL_GRADCHECK_HPP_
#define SYNCTRACK_MODEL_GRADCHECK_HPP_

#include <cstdint>
#include <vector>

#include "synctrack/nn/gradcheck_suite.hpp"

namespace synctrack {

// One APST stage feeding voxelization, the decoder and the detection loss on
// a 12 x 8 x 4 grid, plus a fixed projection of the stage's full output.
// Checks the token features and a sample of stage and head weights.
nn::NamedCheck apst_detection_gradcheck(std::uint64_t seed,
                                        double tolerance = nn::kGradCheckTolerance);

// Every primitive check followed by the composed one.
std::vector<nn::NamedCheck> gradcheck_suite(std::uint64_t seed,
                                            double tolerance = nn::kGradCheckTolerance);

}  // namespace synctrack

#endif  // SYNCTRACK_MODEL_GRADCHECK_HPP_
