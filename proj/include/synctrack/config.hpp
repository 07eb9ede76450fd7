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

#ifndef SYNCTRACK_CONFIG_HPP_
#define SYNCTRACK_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "synctrack/tracker.hpp"

namespace synctrack {

// `key = value` lines with '#' comments; absent keys keep their defaults.
// Keys (defaults in parentheses):
//   n_template (512), n_search (1024), search_enlarge_xy (2), search_enlarge_z (1),
//   min_search_points (5), template_strategy (first | first_and_previous),
//   channels (32,64,128), tokens (256,128,64; sets template_tokens and
//   search_tokens), heads (2; one value or one per stage), knn_k (16),
//   ffn_ratio (2), attentive_score (logits | softmax), fuse_channels (32),
//   head_channels (32), voxel (0.3; one value or x,y,z), range_x (-5.6:5.6),
//   range_y (-3.6:3.6), range_z (-2.4:2.4), target_radius (2), loss_cls (1),
//   loss_reg (1), loss_z (2), epochs (40), batch (64), lr (0.001),
//   lr_decay_factor (5), lr_decay_every (10), jitter_xy (0.3),
//   jitter_yaw_deg (5), precision (single | double), seed (0).
// Throws ConfigError naming the key and line.
tracker::TrackerConfig parse_config(const std::string& text);
tracker::TrackerConfig load_config(const std::filesystem::path& path);

// Every key, one per line, in a form parse_config reads back to an equal
// configuration.
std::string serialize_config(const tracker::TrackerConfig& config);

bool operator==(const tracker::TrackerConfig& a, const tracker::TrackerConfig& b);

}  // namespace synctrack

#endif  // SYNCTRACK_CONFIG_HPP_
