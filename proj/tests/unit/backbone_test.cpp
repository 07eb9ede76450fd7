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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "synctrack/backbone.hpp"
#include "synctrack/nn/gradcheck.hpp"
#include "synctrack/nn/gradcheck_suite.hpp"
#include "synctrack/nn/ops.hpp"

namespace synctrack::backbone {
namespace {

using Td = nn::Tensor<double>;

std::vector<double> eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return v;
}

void add_identity_attention(nn::ParameterSet<double>& ps, const std::string& prefix,
                            std::size_t c) {
  for (const char* name : {"q", "k", "v", "o"}) {
    ps.add(prefix + ".w" + name + ".w", {c, c}, eye(c));
    ps.add(prefix + ".w" + name + ".b", {c}, std::vector<double>(c, 0.0));
  }
}

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double half = 2.0) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

TokenSet<double> random_tokens(std::size_t n, std::size_t c, std::mt19937_64& rng) {
  return {random_points(n, rng), nn::random_tensor({n, c}, rng, -1, 1, false)};
}

AttentionRecord<double> record_from_logits(const std::vector<std::vector<double>>& logits,
                                           std::size_t nt, std::size_t ns) {
  AttentionRecord<double> rec;
  rec.n_template = nt;
  rec.n_search = ns;
  const std::size_t n = nt + ns;
  for (const auto& head : logits) {
    rec.logits.push_back(Td({n, n}, head));
    rec.attn.push_back(nn::softmax_rows(rec.logits.back()));
  }
  return rec;
}

TEST(PositionalEmbedding, ZeroMapAndHandValue) {
  const std::vector<Vec3> c{{1, 0, 0}, {0.5, -2, 3}};
  const Td zero = positional_embedding<double>(c, Td::zeros({3, 2}), Td::zeros({2}));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  const Td w({3, 2}, {1, 0, 0, 0, 0, 0});
  const Td e = positional_embedding<double>(c, w, Td::zeros({2}));
  EXPECT_EQ(e[0], 1.0);
  EXPECT_EQ(e[1], 0.0);
}

TEST(PositionalEmbedding, SameCoordinatesSameAddend) {
  std::mt19937_64 rng(1);
  const std::vector<Vec3> c{{0.3, 0.2, 0.1}, {4, 4, 4}, {0.3, 0.2, 0.1}};
  const Td e = positional_embedding<double>(c, nn::random_tensor({3, 5}, rng, -1, 1, false),
                                            nn::random_tensor({5}, rng, -1, 1, false));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(e[i], e[10 + i]);
}

TEST(JointAttention, SingleTokenDoublesThroughResidual) {
  nn::ParameterSet<double> ps;
  add_identity_attention(ps, "a", 2);
  const AttentionRecord<double> rec =
      multi_head_joint_attention<double>(Td({1, 2}, {1, 0}), Td(), 1, ps, "a");
  ASSERT_EQ(rec.attn.size(), 1u);
  EXPECT_EQ(rec.attn[0].shape(), (nn::Shape{1, 1}));
  EXPECT_EQ(rec.attn[0][0], 1.0);
  EXPECT_EQ(rec.output[0], 2.0);
  EXPECT_EQ(rec.output[1], 0.0);
}

TEST(JointAttention, LogitsAreScaledDotProducts) {
  std::mt19937_64 rng(2);
  nn::ParameterSet<double> ps;
  add_attention_params(ps, "a", 4, rng);
  const Td ft = nn::random_tensor({2, 4}, rng, -1, 1, false);
  const Td fs = nn::random_tensor({3, 4}, rng, -1, 1, false);
  const auto rec = multi_head_joint_attention(ft, fs, 2, ps, "a");
  const Td x = nn::concat<double>(std::vector<Td>{ft, fs}, 0);
  const Td q = nn::linear(x, ps.at("a.wq.w").tensor, ps.at("a.wq.b").tensor);
  const Td k = nn::linear(x, ps.at("a.wk.w").tensor, ps.at("a.wk.b").tensor);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < 2; ++d) dot += q[i * 4 + m * 2 + d] * k[j * 4 + m * 2 + d];
        EXPECT_NEAR(rec.logits[m][i * 5 + j], dot / std::sqrt(2.0), 1e-14);
      }
}

TEST(JointAttention, RowsSumToOneAndSearchRowsMatchStandalone) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nt = 1 + rng() % 8, ns = 1 + rng() % 8;
    const std::size_t c = rng() % 2 ? 4 : 8, heads = rng() % 2 ? 1 : 2;
    nn::ParameterSet<double> ps;
    add_attention_params(ps, "a", c, rng);
    const Td ft = nn::random_tensor({nt, c}, rng, -2, 2, false);
    const Td fs = nn::random_tensor({ns, c}, rng, -2, 2, false);
    const auto rec = multi_head_joint_attention(ft, fs, heads, ps, "a");
    const auto alone = search_query_attention(ft, fs, heads, ps, "a");
    const std::size_t n = nt + ns;
    for (std::size_t m = 0; m < heads; ++m) {
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t cidx = 0; cidx < n; ++cidx) s += rec.attn[m][r * n + cidx];
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
      for (std::size_t r = 0; r < ns; ++r)
        for (std::size_t cidx = 0; cidx < n; ++cidx)
          EXPECT_NEAR(alone[m][r * n + cidx], rec.attn[m][(nt + r) * n + cidx], 1e-12);
    }
  }
}

TEST(JointAttention, WidthAndHeadMismatchThrow) {
  std::mt19937_64 rng(4);
  nn::ParameterSet<double> ps;
  add_attention_params(ps, "a", 4, rng);
  EXPECT_THROW(multi_head_joint_attention<double>(Td::zeros({2, 4}), Td::zeros({2, 3}), 1, ps,
                                                  "a"),
               std::invalid_argument);
  EXPECT_THROW(multi_head_joint_attention<double>(Td::zeros({2, 4}), Td::zeros({2, 4}), 3, ps,
                                                  "a"),
               std::invalid_argument);
}

TEST(AttentiveSample, EqualScoresTakeLowestIndices) {
  const auto rec = record_from_logits({std::vector<double>(36, 0.5)}, 2, 4);
  EXPECT_EQ(attentive_sample(rec, 3).indices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(AttentiveSample, HandDotProducts) {
  nn::ParameterSet<double> ps;
  add_identity_attention(ps, "a", 2);
  const auto rec = multi_head_joint_attention<double>(Td({1, 2}, {1, 0}),
                                                      Td({3, 2}, {2, 0, 1, 0, 0, 5}), 1, ps, "a");
  const auto scores = attentive_scores(rec);
  EXPECT_NEAR(scores[0], 2.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(scores[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(scores[2], 0.0, 1e-15);
  EXPECT_EQ(attentive_sample(rec, 1).indices, (std::vector<std::size_t>{0}));
}

TEST(AttentiveSample, MatchesExhaustiveSubsetOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t nt = 1 + rng() % 4, ns = 1 + rng() % 10, heads = 1 + rng() % 2;
    const std::size_t k = 1 + rng() % std::min<std::size_t>(5, ns);
    const std::size_t n = nt + ns;
    // Integer logits on even trials so exact ties are common.
    std::vector<std::vector<double>> logits(heads, std::vector<double>(n * n));
    std::uniform_real_distribution<double> u(-3, 3);
    for (auto& h : logits)
      for (double& v : h) v = trial % 2 == 0 ? std::floor(u(rng)) : u(rng);
    const auto rec = record_from_logits(logits, nt, ns);
    EXPECT_EQ(attentive_sample(rec, k).indices, oracle::best_search_subset(logits, nt, ns, k))
        << "trial " << trial;
  }
}

TEST(AttentiveSample, InvariantToPositiveScaleAndShift) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> logits(2, std::vector<double>(100));
    for (auto& h : logits)
      for (double& v : h) v = u(rng);
    auto moved = logits;
    for (auto& h : moved)
      for (double& v : h) v = 2.5 * v - 7.0;
    EXPECT_EQ(attentive_sample(record_from_logits(logits, 3, 7), 4).indices,
              attentive_sample(record_from_logits(moved, 3, 7), 4).indices);
  }
}

TEST(AttentiveSample, TooManyThrows) {
  const auto rec = record_from_logits({std::vector<double>(9, 0.0)}, 1, 2);
  EXPECT_THROW(attentive_sample(rec, 3), std::invalid_argument);
}

TEST(AttentiveSample, SoftmaxScoresAreAnOption) {
  const std::vector<std::vector<double>> logits{{0, 5, 1, 0, 0, 0, 0, 0, 0}};
  const auto rec = record_from_logits(logits, 1, 2);
  const auto s = attentive_scores(rec, ScoreMode::kSoftmax);
  EXPECT_NEAR(s[0], rec.attn[0][1], 1e-15);
  EXPECT_NEAR(s[1], rec.attn[0][2], 1e-15);
}

void add_stage_params(nn::ParameterSet<double>& ps, const std::string& p, std::size_t in,
                      std::size_t c, std::mt19937_64& rng) {
  ps.add(p + ".entry.w", {in, c}, nn::he_uniform<double>(in * c, in, rng));
  ps.add(p + ".entry.b", {c}, std::vector<double>(c, 0.1));
  ps.add(p + ".norm.gamma", {c}, std::vector<double>(c, 1.0));
  ps.add(p + ".norm.beta", {c}, std::vector<double>(c, 0.0));
  add_attention_params(ps, p + ".attn", c, rng);
  ps.add(p + ".ffn1.w", {c, 2 * c}, nn::he_uniform<double>(2 * c * c, c, rng));
  ps.add(p + ".ffn1.b", {2 * c}, std::vector<double>(2 * c, 0.0));
  ps.add(p + ".ffn2.w", {2 * c, c}, nn::he_uniform<double>(2 * c * c, 2 * c, rng));
  ps.add(p + ".ffn2.b", {c}, std::vector<double>(c, 0.0));
}

TEST(ApstStage, NoReductionKeepsCoordinates) {
  std::mt19937_64 rng(7);
  nn::ParameterSet<double> ps;
  add_stage_params(ps, "s", 3, 4, rng);
  const auto t = random_tokens(5, 3, rng), s = random_tokens(6, 3, rng);
  const auto out = apst_stage(t, s, {4, 2, 5, 6}, ScoreMode::kLogits, ps, "s");
  auto xs = [](const std::vector<Vec3>& v) {
    std::multiset<double> m;
    for (const Vec3& p : v) m.insert(p.x);
    return m;
  };
  EXPECT_EQ(xs(out.template_tokens.coords), xs(t.coords));
  EXPECT_EQ(out.search_tokens.coords, s.coords);
}

TEST(ApstStage, OutputCountsFollowConfigAndCoordinatesAreSubsets) {
  std::mt19937_64 rng(8);
  nn::ParameterSet<double> ps;
  add_stage_params(ps, "s", 6, 8, rng);
  const auto t = random_tokens(12, 6, rng), s = random_tokens(20, 6, rng);
  const auto out = apst_stage(t, s, {8, 2, 7, 9}, ScoreMode::kLogits, ps, "s");
  EXPECT_EQ(out.template_tokens.feats.shape(), (nn::Shape{7, 8}));
  EXPECT_EQ(out.search_tokens.feats.shape(), (nn::Shape{9, 8}));
  for (const Vec3& p : out.template_tokens.coords)
    EXPECT_NE(std::find(t.coords.begin(), t.coords.end(), p), t.coords.end());
  const auto keep = attentive_sample(out.record, 9).indices;
  for (std::size_t i = 0; i < keep.size(); ++i)
    EXPECT_EQ(out.search_tokens.coords[i], s.coords[keep[i]]);
  EXPECT_THROW(apst_stage(t, s, {8, 2, 13, 9}, ScoreMode::kLogits, ps, "s"),
               std::invalid_argument);
}

TEST(ApstStage, AlignedKeyIsSelected) {
  // After entry (identity, relu, layer norm) template rows become [1, -1];
  // search row 3 does too while the others become [-1, 1], so only its key
  // agrees with every template query.
  nn::ParameterSet<double> ps;
  ps.add("s.entry.w", {2, 2}, eye(2));
  ps.add("s.entry.b", {2}, {0, 0});
  ps.add("s.norm.gamma", {2}, {1, 1});
  ps.add("s.norm.beta", {2}, {0, 0});
  add_identity_attention(ps, "s.attn", 2);
  ps.add("s.ffn1.w", {2, 4}, std::vector<double>(8, 0.0));
  ps.add("s.ffn1.b", {4}, std::vector<double>(4, 0.0));
  ps.add("s.ffn2.w", {4, 2}, std::vector<double>(8, 0.0));
  ps.add("s.ffn2.b", {2}, {0, 0});
  std::mt19937_64 rng(9);
  TokenSet<double> t{random_points(3, rng), Td({3, 2}, {1, 0, 2, 0, 0.5, 0})};
  TokenSet<double> s{random_points(5, rng), Td({5, 2}, {0, 1, 0, 2, 0, 1, 3, 0, 0, 1})};
  const auto out = apst_stage(t, s, {2, 1, 3, 1}, ScoreMode::kLogits, ps, "s");
  EXPECT_EQ(attentive_sample(out.record, 1).indices, (std::vector<std::size_t>{3}));
  ASSERT_EQ(out.search_tokens.size(), 1u);
  EXPECT_EQ(out.search_tokens.coords[0], s.coords[3]);
}

TEST(ApstStage, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  nn::ParameterSet<double> ps;
  add_stage_params(ps, "s", 3, 4, rng);
  const auto t = random_tokens(4, 3, rng), s = random_tokens(6, 3, rng);
  std::vector<Td> inputs{nn::random_tensor({4, 3}, rng, -1, 1),
                         nn::random_tensor({6, 3}, rng, -1, 1)};
  for (const char* name : {"s.entry.w", "s.attn.wq.w", "s.attn.wk.w", "s.attn.wv.w",
                           "s.attn.wo.w", "s.ffn1.w", "s.ffn2.w", "s.norm.gamma"})
    inputs.push_back(ps.at(name).tensor);
  const auto r = nn::finite_diff_gradcheck(
      [&](const std::vector<Td>& in) {
        const auto out = apst_stage<double>({t.coords, in[0]}, {s.coords, in[1]},
                                            {4, 2, 3, 4}, ScoreMode::kLogits, ps, "s");
        return nn::add(nn::random_projection(out.template_tokens.feats, 1),
                       nn::random_projection(out.search_tokens.feats, 2));
      },
      inputs);
  EXPECT_LT(r.max_rel_error, 1e-4) << "input " << r.worst_input << " index " << r.worst_index;
}

TEST(Backbone, DefaultConfigStageShapes) {
  std::mt19937_64 rng(11);
  BackboneConfig cfg;
  nn::ParameterSet<float> ps;
  add_backbone_params(ps, cfg, rng);
  const auto tmpl = random_points(512, rng, 1.5), search = random_points(1024, rng, 4.0);
  const auto out = backbone_forward<float>(tmpl, search, cfg, ps);
  ASSERT_EQ(out.stages.size(), 3u);
  const std::size_t want[3][3] = {{256, 256, 32}, {128, 128, 64}, {64, 64, 128}};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.stages[i].template_tokens.feats.shape(), (nn::Shape{want[i][0], want[i][2]}));
    EXPECT_EQ(out.stages[i].search_tokens.feats.shape(), (nn::Shape{want[i][1], want[i][2]}));
    EXPECT_EQ(out.stages[i].search_tokens.coords.size(), want[i][1]);
  }
  EXPECT_EQ(out.search0.feats.shape(), (nn::Shape{1024, 32}));
}

BackboneConfig narrow() {
  BackboneConfig cfg;
  cfg.stages = {{8, 2, 64, 64}, {16, 2, 32, 32}, {32, 2, 16, 16}};
  return cfg;
}

TEST(Backbone, DeterministicAcrossRuns) {
  auto run = [] {
    std::mt19937_64 rng(12);
    nn::ParameterSet<double> ps;
    add_backbone_params(ps, narrow(), rng);
    const auto tmpl = random_points(128, rng), search = random_points(256, rng);
    const auto out = backbone_forward<double>(tmpl, search, narrow(), ps);
    const auto v = out.stages.back().search_tokens.feats.values();
    return std::vector<double>(v.begin(), v.end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Backbone, NarrowParameterCountMatchesClosedForm) {
  std::mt19937_64 rng(13);
  nn::ParameterSet<double> ps;
  add_backbone_params(ps, narrow(), rng);
  auto affine = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t want = 2 * affine(3, 8);  // grouping and positional maps
  std::size_t in = 8;
  for (std::size_t c : {8u, 16u, 32u}) {
    want += affine(in, c) + 2 * c + 4 * affine(c, c) + affine(c, 2 * c) + affine(2 * c, c);
    in = c;
  }
  EXPECT_EQ(ps.count("backbone."), want);
  EXPECT_EQ(want, 12080u);
}

TEST(Backbone, TooFewPointsThrow) {
  std::mt19937_64 rng(14);
  nn::ParameterSet<double> ps;
  add_backbone_params(ps, narrow(), rng);
  const auto tmpl = random_points(32, rng), search = random_points(256, rng);
  EXPECT_THROW(backbone_forward<double>(tmpl, search, narrow(), ps), std::invalid_argument);
}

TEST(BackboneConfig, RejectsBadStages) {
  BackboneConfig cfg;
  cfg.stages[1].heads = 3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = BackboneConfig{};
  cfg.stages[2].out_search = 512;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace synctrack::backbone
