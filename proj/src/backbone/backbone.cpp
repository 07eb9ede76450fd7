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

#include "synctrack/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "synctrack/nn/ops.hpp"

namespace synctrack::backbone {

using nn::Tensor;

void BackboneConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("backbone: no stages");
  if (knn_k == 0) throw std::invalid_argument("backbone: knn_k must be positive");
  if (ffn_ratio == 0) throw std::invalid_argument("backbone: ffn_ratio must be positive");
  std::size_t nt = stages.front().out_template;
  std::size_t ns = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    const std::string at = "backbone stage " + std::to_string(i) + ": ";
    if (s.channels == 0 || s.heads == 0 || s.channels % s.heads != 0) {
      throw std::invalid_argument(at + "channels must be a positive multiple of heads");
    }
    if (s.out_template == 0 || s.out_search == 0) {
      throw std::invalid_argument(at + "token counts must be positive");
    }
    if (s.out_template > nt || s.out_search > ns) {
      throw std::invalid_argument(at + "token counts may not grow between stages");
    }
    nt = s.out_template;
    ns = s.out_search;
  }
}

namespace {

template <typename T>
void add_linear(nn::ParameterSet<T>& ps, const std::string& name, std::size_t in,
                std::size_t out, std::mt19937_64& rng) {
  ps.add(name + ".w", {in, out}, nn::he_uniform<T>(in * out, in, rng));
  ps.add(name + ".b", {out}, std::vector<T>(out, T(0)));
}

template <typename T>
Tensor<T> apply_linear(const Tensor<T>& x, const nn::ParameterSet<T>& ps,
                       const std::string& name) {
  return nn::linear(x, ps.at(name + ".w").tensor, ps.at(name + ".b").tensor);
}

template <typename T>
Tensor<T> head_cols(const Tensor<T>& x, std::size_t head, std::size_t width) {
  return nn::slice(x, 1, head * width, (head + 1) * width);
}

template <typename T>
void check_attention_inputs(const Tensor<T>& ft, const Tensor<T>& fs, std::size_t heads) {
  if (ft.rank() != 2 || fs.rank() != 2 || ft.dim(1) != fs.dim(1)) {
    throw std::invalid_argument("attention: template " + nn::shape_string(ft.shape()) +
                                " and search " + nn::shape_string(fs.shape()) +
                                " must be [N, C] with equal C");
  }
  if (heads == 0 || ft.dim(1) % heads != 0) {
    throw std::invalid_argument("attention: " + std::to_string(heads) +
                                " heads do not divide width " + std::to_string(ft.dim(1)));
  }
}

// Stacks template and search rows; a zero-row side is skipped.
template <typename T>
Tensor<T> stack_rows(const Tensor<T>& ft, const Tensor<T>& fs) {
  std::vector<Tensor<T>> parts;
  if (ft.defined()) parts.push_back(ft);
  if (fs.defined()) parts.push_back(fs);
  if (parts.size() == 1) return parts.front();
  return nn::concat<T>(parts, 0);
}

}  // namespace

template <typename T>
void add_attention_params(nn::ParameterSet<T>& ps, const std::string& prefix,
                          std::size_t channels, std::mt19937_64& rng) {
  for (const char* name : {"q", "k", "v", "o"}) {
    add_linear(ps, prefix + ".w" + name, channels, channels, rng);
  }
}

template <typename T>
void add_backbone_params(nn::ParameterSet<T>& ps, const BackboneConfig& config,
                         std::mt19937_64& rng) {
  config.validate();
  const std::size_t c0 = config.group_channels();
  add_linear(ps, "backbone.group", 3, c0, rng);
  add_linear(ps, "backbone.pos", 3, c0, rng);
  std::size_t in = c0;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const std::string p = "backbone.stage" + std::to_string(i);
    const std::size_t c = config.stages[i].channels;
    add_linear(ps, p + ".entry", in, c, rng);
    ps.add(p + ".norm.gamma", {c}, std::vector<T>(c, T(1)));
    ps.add(p + ".norm.beta", {c}, std::vector<T>(c, T(0)));
    add_attention_params(ps, p + ".attn", c, rng);
    add_linear(ps, p + ".ffn1", c, config.ffn_ratio * c, rng);
    add_linear(ps, p + ".ffn2", config.ffn_ratio * c, c, rng);
    in = c;
  }
}

template <typename T>
Tensor<T> positional_embedding(std::span<const Vec3> coords, const Tensor<T>& weight,
                               const Tensor<T>& bias) {
  return nn::linear(coords_tensor<T>(coords), weight, bias);
}

template <typename T>
AttentionRecord<T> multi_head_joint_attention(const Tensor<T>& template_feats,
                                              const Tensor<T>& search_feats,
                                              std::size_t heads,
                                              const nn::ParameterSet<T>& ps,
                                              const std::string& prefix) {
  const Tensor<T>& any = template_feats.defined() ? template_feats : search_feats;
  if (template_feats.defined() && search_feats.defined()) {
    check_attention_inputs(template_feats, search_feats, heads);
  } else {
    check_attention_inputs(any, any, heads);
  }
  const Tensor<T> x = stack_rows(template_feats, search_feats);
  const std::size_t width = x.dim(1) / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(width));

  const Tensor<T> q = apply_linear(x, ps, prefix + ".wq");
  const Tensor<T> k = apply_linear(x, ps, prefix + ".wk");
  const Tensor<T> v = apply_linear(x, ps, prefix + ".wv");

  AttentionRecord<T> rec;
  rec.n_template = template_feats.defined() ? template_feats.dim(0) : 0;
  rec.n_search = search_feats.defined() ? search_feats.dim(0) : 0;
  std::vector<Tensor<T>> outs;
  for (std::size_t m = 0; m < heads; ++m) {
    const Tensor<T> logits = nn::scale(
        nn::matmul(head_cols(q, m, width), nn::transpose(head_cols(k, m, width))), inv_sqrt);
    const Tensor<T> attn = nn::softmax_rows(logits);
    outs.push_back(nn::matmul(attn, head_cols(v, m, width)));
    rec.logits.push_back(logits);
    rec.attn.push_back(attn);
  }
  const Tensor<T> merged = heads == 1 ? outs.front() : nn::concat<T>(outs, 1);
  rec.output = nn::add(x, apply_linear(merged, ps, prefix + ".wo"));
  return rec;
}

template <typename T>
std::vector<Tensor<T>> search_query_attention(const Tensor<T>& template_feats,
                                              const Tensor<T>& search_feats,
                                              std::size_t heads,
                                              const nn::ParameterSet<T>& ps,
                                              const std::string& prefix) {
  check_attention_inputs(template_feats, search_feats, heads);
  const Tensor<T> x = stack_rows(template_feats, search_feats);
  const std::size_t width = x.dim(1) / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(width));
  const Tensor<T> qs = apply_linear(search_feats, ps, prefix + ".wq");
  const Tensor<T> k = apply_linear(x, ps, prefix + ".wk");
  std::vector<Tensor<T>> rows;
  for (std::size_t m = 0; m < heads; ++m) {
    rows.push_back(nn::softmax_rows(nn::scale(
        nn::matmul(head_cols(qs, m, width), nn::transpose(head_cols(k, m, width))),
        inv_sqrt)));
  }
  return rows;
}

template <typename T>
std::vector<double> attentive_scores(const AttentionRecord<T>& record, ScoreMode mode) {
  const std::size_t nt = record.n_template;
  const std::size_t ns = record.n_search;
  const std::size_t n = nt + ns;
  const auto& maps = mode == ScoreMode::kLogits ? record.logits : record.attn;
  std::vector<double> scores(ns, 0.0);
  if (nt == 0) return scores;
  for (const Tensor<T>& map : maps) {
    const auto v = map.values();
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t j = 0; j < ns; ++j) scores[j] += static_cast<double>(v[t * n + nt + j]);
  }
  const double norm = static_cast<double>(nt * maps.size());
  for (double& s : scores) s /= norm;
  return scores;
}

sampling::SampleSelection top_k_ascending(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) {
    throw std::invalid_argument("attentive_sample: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(scores.size()) + " search tokens");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  sampling::SampleSelection sel;
  sel.indices = order;
  for (std::size_t i : order) sel.scores.push_back(scores[i]);
  return sel;
}

template <typename T>
sampling::SampleSelection attentive_sample(const AttentionRecord<T>& record, std::size_t k,
                                           ScoreMode mode) {
  const std::vector<double> scores = attentive_scores(record, mode);
  return top_k_ascending(scores, k);
}

template <typename T>
StageOutput<T> apst_stage(const TokenSet<T>& template_tokens,
                          const TokenSet<T>& search_tokens, const StageConfig& stage,
                          ScoreMode mode,
                          const nn::ParameterSet<T>& ps, const std::string& prefix) {
  template_tokens.check();
  search_tokens.check();
  const std::size_t nt = template_tokens.size();
  const std::size_t ns = search_tokens.size();
  if (stage.out_template > nt || stage.out_search > ns) {
    throw std::invalid_argument(prefix + ": asked for " + std::to_string(stage.out_template) +
                                "/" + std::to_string(stage.out_search) + " tokens from " +
                                std::to_string(nt) + "/" + std::to_string(ns));
  }
  auto enter = [&](const Tensor<T>& f) {
    return nn::layer_norm(nn::relu(apply_linear(f, ps, prefix + ".entry")),
                          ps.at(prefix + ".norm.gamma").tensor,
                          ps.at(prefix + ".norm.beta").tensor);
  };
  StageOutput<T> out;
  out.record = multi_head_joint_attention(enter(template_tokens.feats),
                                          enter(search_tokens.feats), stage.heads, ps,
                                          prefix + ".attn");
  const Tensor<T>& joint = out.record.output;

  const auto keep_t =
      sampling::farthest_point_sampling(template_tokens.coords, stage.out_template, 0).indices;
  auto keep_s = attentive_sample(out.record, stage.out_search, mode).indices;
  for (std::size_t& j : keep_s) j += nt;

  auto ffn = [&](const Tensor<T>& x) {
    const Tensor<T> h = nn::relu(apply_linear(x, ps, prefix + ".ffn1"));
    return nn::add(x, apply_linear(h, ps, prefix + ".ffn2"));
  };
  for (std::size_t i : keep_t) out.template_tokens.coords.push_back(template_tokens.coords[i]);
  for (std::size_t j : keep_s) out.search_tokens.coords.push_back(search_tokens.coords[j - nt]);
  out.template_tokens.feats = ffn(nn::gather_rows<T>(joint, keep_t));
  out.search_tokens.feats = ffn(nn::gather_rows<T>(joint, keep_s));
  return out;
}

template <typename T>
BackboneOutput<T> backbone_forward(std::span<const Vec3> template_points,
                                   std::span<const Vec3> search_points,
                                   const BackboneConfig& config,
                                   const nn::ParameterSet<T>& ps) {
  const std::size_t k = config.knn_k;
  const std::size_t seeds = config.template_seeds();
  if (template_points.size() < std::max(seeds, k) || search_points.size() < k ||
      search_points.size() < config.stages.front().out_search) {
    throw std::invalid_argument("backbone: " + std::to_string(template_points.size()) +
                                " template / " + std::to_string(search_points.size()) +
                                " search points are too few for this configuration");
  }
  const Tensor<T>& gw = ps.at("backbone.group.w").tensor;
  const Tensor<T>& gb = ps.at("backbone.group.b").tensor;
  const Tensor<T>& pw = ps.at("backbone.pos.w").tensor;
  const Tensor<T>& pb = ps.at("backbone.pos.b").tensor;

  std::vector<Vec3> seed_coords;
  for (std::size_t i : sampling::farthest_point_sampling(template_points, seeds, 0).indices)
    seed_coords.push_back(template_points[i]);
  TokenSet<T> t = sampling::query_and_group<T>(seed_coords, template_points, Tensor<T>(), k,
                                               gw, gb);
  TokenSet<T> s = sampling::query_and_group<T>(search_points, Tensor<T>(), k, gw, gb);
  t.feats = nn::add(t.feats, positional_embedding<T>(t.coords, pw, pb));
  s.feats = nn::add(s.feats, positional_embedding<T>(s.coords, pw, pb));

  BackboneOutput<T> out;
  out.search0 = s;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    StageOutput<T> st = apst_stage(t, s, config.stages[i], config.score, ps,
                                   "backbone.stage" + std::to_string(i));
    t = st.template_tokens;
    s = st.search_tokens;
    out.stages.push_back(std::move(st));
  }
  return out;
}

#define SYNCTRACK_INSTANTIATE_BACKBONE(T)                                                   \
  template void add_attention_params<T>(nn::ParameterSet<T>&, const std::string&,          \
                                        std::size_t, std::mt19937_64&);                     \
  template void add_backbone_params<T>(nn::ParameterSet<T>&, const BackboneConfig&,        \
                                       std::mt19937_64&);                                   \
  template Tensor<T> positional_embedding<T>(std::span<const Vec3>, const Tensor<T>&,       \
                                             const Tensor<T>&);                             \
  template AttentionRecord<T> multi_head_joint_attention<T>(                                \
      const Tensor<T>&, const Tensor<T>&, std::size_t, const nn::ParameterSet<T>&,          \
      const std::string&);                                                                  \
  template std::vector<Tensor<T>> search_query_attention<T>(                                \
      const Tensor<T>&, const Tensor<T>&, std::size_t, const nn::ParameterSet<T>&,          \
      const std::string&);                                                                  \
  template std::vector<double> attentive_scores<T>(const AttentionRecord<T>&, ScoreMode);  \
  template sampling::SampleSelection attentive_sample<T>(const AttentionRecord<T>&,         \
                                                         std::size_t, ScoreMode);           \
  template StageOutput<T> apst_stage<T>(const TokenSet<T>&, const TokenSet<T>&,             \
                                        const StageConfig&, ScoreMode,                      \
                                        const nn::ParameterSet<T>&, const std::string&);    \
  template BackboneOutput<T> backbone_forward<T>(std::span<const Vec3>,                    \
                                                 std::span<const Vec3>,                     \
                                                 const BackboneConfig&,                     \
                                                 const nn::ParameterSet<T>&);

SYNCTRACK_INSTANTIATE_BACKBONE(float)
SYNCTRACK_INSTANTIATE_BACKBONE(double)

}  // namespace synctrack::backbone
