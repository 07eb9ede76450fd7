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

#include "synctrack/config.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include "synctrack/errors.hpp"
#include "synctrack/keyvalue.hpp"

namespace synctrack {

using tracker::TrackerConfig;

namespace {

[[noreturn]] void bad(const KeyValue& kv, const std::string& what) {
  throw ConfigError("invalid value '" + kv.value + "' for key '" + kv.key + "' (line " +
                    std::to_string(kv.line) + "): " + what);
}

std::vector<double> parse_real_list(const KeyValue& kv) {
  std::vector<double> out;
  std::istringstream in(kv.value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_real({kv.key, item, kv.line}));
  return out;
}

// Broadcasts a single value over `n` stages.
std::vector<std::size_t> per_stage(const std::optional<KeyValue>& kv,
                                   const std::vector<std::size_t>& values, std::size_t n) {
  if (values.size() == 1) return std::vector<std::size_t>(n, values[0]);
  if (values.size() != n) {
    bad(*kv, "expected 1 or " + std::to_string(n) + " entries (one per stage)");
  }
  return values;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

TrackerConfig parse_config(const std::string& text) {
  TrackerConfig c;
  std::vector<std::size_t> channels, heads, tmpl_tokens, search_tokens;
  for (const auto& s : c.backbone.stages) {
    channels.push_back(s.channels);
    heads.push_back(s.heads);
    tmpl_tokens.push_back(s.out_template);
    search_tokens.push_back(s.out_search);
  }
  std::optional<KeyValue> channels_kv, heads_kv, tmpl_kv, search_kv;

  for (const KeyValue& kv : parse_key_values(text)) {
    const std::string& k = kv.key;
    if (k == "n_template") {
      c.n_template = parse_count(kv);
    } else if (k == "n_search") {
      c.n_search = parse_count(kv);
    } else if (k == "search_enlarge_xy") {
      c.search_enlarge_xy = parse_real(kv);
    } else if (k == "search_enlarge_z") {
      c.search_enlarge_z = parse_real(kv);
    } else if (k == "min_search_points") {
      c.min_search_points = parse_count(kv);
    } else if (k == "template_strategy") {
      if (kv.value == "first") {
        c.template_strategy = tracker::TemplateStrategy::kFirst;
      } else if (kv.value == "first_and_previous") {
        c.template_strategy = tracker::TemplateStrategy::kFirstAndPrevious;
      } else {
        bad(kv, "expected 'first' or 'first_and_previous'");
      }
    } else if (k == "channels") {
      channels = parse_count_list(kv);
      channels_kv = kv;
    } else if (k == "heads") {
      heads = parse_count_list(kv);
      heads_kv = kv;
    } else if (k == "tokens") {
      tmpl_tokens = search_tokens = parse_count_list(kv);
      tmpl_kv = search_kv = kv;
    } else if (k == "template_tokens") {
      tmpl_tokens = parse_count_list(kv);
      tmpl_kv = kv;
    } else if (k == "search_tokens") {
      search_tokens = parse_count_list(kv);
      search_kv = kv;
    } else if (k == "knn_k") {
      c.backbone.knn_k = parse_count(kv);
    } else if (k == "ffn_ratio") {
      c.backbone.ffn_ratio = parse_count(kv);
    } else if (k == "attentive_score") {
      if (kv.value == "logits") {
        c.backbone.score = backbone::ScoreMode::kLogits;
      } else if (kv.value == "softmax") {
        c.backbone.score = backbone::ScoreMode::kSoftmax;
      } else {
        bad(kv, "expected 'logits' or 'softmax'");
      }
    } else if (k == "fuse_channels") {
      c.head.fuse_channels = parse_count(kv);
    } else if (k == "head_channels") {
      c.head.head_channels = parse_count(kv);
    } else if (k == "voxel") {
      const auto v = parse_real_list(kv);
      if (v.size() == 1) {
        c.grid.voxel = {v[0], v[0], v[0]};
      } else if (v.size() == 3) {
        c.grid.voxel = {v[0], v[1], v[2]};
      } else {
        bad(kv, "expected one value or x,y,z");
      }
    } else if (k == "range_x" || k == "range_y" || k == "range_z") {
      const auto [lo, hi] = parse_real_pair(kv);
      double Vec3::*axis = k == "range_x" ? &Vec3::x : k == "range_y" ? &Vec3::y : &Vec3::z;
      c.grid.min.*axis = lo;
      c.grid.max.*axis = hi;
    } else if (k == "target_radius") {
      c.target_radius = parse_real(kv);
    } else if (k == "loss_cls") {
      c.loss.cls = parse_real(kv);
    } else if (k == "loss_reg") {
      c.loss.reg = parse_real(kv);
    } else if (k == "loss_z") {
      c.loss.z = parse_real(kv);
    } else if (k == "epochs") {
      c.epochs = parse_count(kv);
    } else if (k == "batch") {
      c.batch = parse_count(kv);
    } else if (k == "lr") {
      c.lr = parse_real(kv);
    } else if (k == "lr_decay_factor") {
      c.lr_decay_factor = parse_real(kv);
    } else if (k == "lr_decay_every") {
      c.lr_decay_every = parse_count(kv);
    } else if (k == "jitter_xy") {
      c.jitter_xy = parse_real(kv);
    } else if (k == "jitter_yaw_deg") {
      c.jitter_yaw_deg = parse_real(kv);
    } else if (k == "precision") {
      if (kv.value == "single") {
        c.precision = tracker::Precision::kSingle;
      } else if (kv.value == "double") {
        c.precision = tracker::Precision::kDouble;
      } else {
        bad(kv, "expected 'single' or 'double'");
      }
    } else if (k == "seed") {
      c.seed = parse_u64(kv);
    } else {
      throw_unknown_key(kv);
    }
  }

  // The channel list fixes the stage count; the other lists broadcast or match.
  const std::size_t n = channels.size();
  if (heads_kv) {
    heads = per_stage(heads_kv, heads, n);
  } else if (heads.size() != n) {
    heads.assign(n, heads.front());
  }
  for (auto [kv, tokens] :
       {std::pair{&tmpl_kv, &tmpl_tokens}, std::pair{&search_kv, &search_tokens}}) {
    if (*kv) {
      *tokens = per_stage(*kv, *tokens, n);
    } else if (tokens->size() != n) {
      bad(*channels_kv, "token counts must be given for " + std::to_string(n) + " stages");
    }
  }
  c.backbone.stages.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.backbone.stages[i] = {channels[i], heads[i], tmpl_tokens[i], search_tokens[i]};
  }
  c.validate();
  return c;
}

TrackerConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const TrackerConfig& c) {
  std::vector<std::size_t> channels, heads, tmpl_tokens, search_tokens;
  for (const auto& s : c.backbone.stages) {
    channels.push_back(s.channels);
    heads.push_back(s.heads);
    tmpl_tokens.push_back(s.out_template);
    search_tokens.push_back(s.out_search);
  }
  const auto& g = c.grid;
  std::ostringstream out;
  auto line = [&](const std::string& k, const std::string& v) { out << k << " = " << v << '\n'; };
  auto range = [](double lo, double hi) { return format_real(lo) + ":" + format_real(hi); };
  line("n_template", std::to_string(c.n_template));
  line("n_search", std::to_string(c.n_search));
  line("search_enlarge_xy", format_real(c.search_enlarge_xy));
  line("search_enlarge_z", format_real(c.search_enlarge_z));
  line("min_search_points", std::to_string(c.min_search_points));
  line("template_strategy", c.template_strategy == tracker::TemplateStrategy::kFirst
                                ? "first"
                                : "first_and_previous");
  line("channels", join(channels));
  line("heads", join(heads));
  if (tmpl_tokens == search_tokens) {
    line("tokens", join(tmpl_tokens));
  } else {
    line("template_tokens", join(tmpl_tokens));
    line("search_tokens", join(search_tokens));
  }
  line("knn_k", std::to_string(c.backbone.knn_k));
  line("ffn_ratio", std::to_string(c.backbone.ffn_ratio));
  line("attentive_score", c.backbone.score == backbone::ScoreMode::kLogits ? "logits" : "softmax");
  line("fuse_channels", std::to_string(c.head.fuse_channels));
  line("head_channels", std::to_string(c.head.head_channels));
  if (g.voxel.x == g.voxel.y && g.voxel.y == g.voxel.z) {
    line("voxel", format_real(g.voxel.x));
  } else {
    line("voxel", format_real(g.voxel.x) + "," + format_real(g.voxel.y) + "," +
                      format_real(g.voxel.z));
  }
  line("range_x", range(g.min.x, g.max.x));
  line("range_y", range(g.min.y, g.max.y));
  line("range_z", range(g.min.z, g.max.z));
  line("target_radius", format_real(c.target_radius));
  line("loss_cls", format_real(c.loss.cls));
  line("loss_reg", format_real(c.loss.reg));
  line("loss_z", format_real(c.loss.z));
  line("epochs", std::to_string(c.epochs));
  line("batch", std::to_string(c.batch));
  line("lr", format_real(c.lr));
  line("lr_decay_factor", format_real(c.lr_decay_factor));
  line("lr_decay_every", std::to_string(c.lr_decay_every));
  line("jitter_xy", format_real(c.jitter_xy));
  line("jitter_yaw_deg", format_real(c.jitter_yaw_deg));
  line("precision", c.precision == tracker::Precision::kSingle ? "single" : "double");
  line("seed", std::to_string(c.seed));
  return out.str();
}

bool operator==(const TrackerConfig& a, const TrackerConfig& b) {
  auto stages_equal = [](const backbone::BackboneConfig& x, const backbone::BackboneConfig& y) {
    if (x.stages.size() != y.stages.size()) return false;
    for (std::size_t i = 0; i < x.stages.size(); ++i) {
      const auto &p = x.stages[i], &q = y.stages[i];
      if (p.channels != q.channels || p.heads != q.heads || p.out_template != q.out_template ||
          p.out_search != q.out_search) {
        return false;
      }
    }
    return x.knn_k == y.knn_k && x.ffn_ratio == y.ffn_ratio && x.score == y.score;
  };
  return a.n_template == b.n_template && a.n_search == b.n_search &&
         a.search_enlarge_xy == b.search_enlarge_xy && a.search_enlarge_z == b.search_enlarge_z &&
         a.min_search_points == b.min_search_points && a.template_strategy == b.template_strategy &&
         stages_equal(a.backbone, b.backbone) && a.head.fuse_channels == b.head.fuse_channels &&
         a.head.head_channels == b.head.head_channels && a.grid.min == b.grid.min &&
         a.grid.max == b.grid.max && a.grid.voxel == b.grid.voxel &&
         a.target_radius == b.target_radius && a.loss.cls == b.loss.cls &&
         a.loss.reg == b.loss.reg && a.loss.z == b.loss.z && a.epochs == b.epochs &&
         a.batch == b.batch && a.lr == b.lr && a.lr_decay_factor == b.lr_decay_factor &&
         a.lr_decay_every == b.lr_decay_every && a.jitter_xy == b.jitter_xy &&
         a.jitter_yaw_deg == b.jitter_yaw_deg && a.precision == b.precision && a.seed == b.seed;
}

}  // namespace synctrack
