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

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "synctrack/config.hpp"
#include "synctrack/errors.hpp"
#include "synctrack/weights.hpp"

namespace synctrack {
namespace {

using tracker::TrackerConfig;

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfig, EmptyFileGivesDefaults) {
  const TrackerConfig c = parse_config("");
  EXPECT_TRUE(c == TrackerConfig{});
  EXPECT_EQ(c.n_template, 512u);
  EXPECT_EQ(c.n_search, 1024u);
  ASSERT_EQ(c.backbone.stages.size(), 3u);
  const std::size_t channels[] = {32, 64, 128}, tokens[] = {256, 128, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(c.backbone.stages[i].channels, channels[i]);
    EXPECT_EQ(c.backbone.stages[i].heads, 2u);
    EXPECT_EQ(c.backbone.stages[i].out_template, tokens[i]);
    EXPECT_EQ(c.backbone.stages[i].out_search, tokens[i]);
  }
  EXPECT_EQ(c.grid.voxel, (Vec3{0.3, 0.3, 0.3}));
  EXPECT_EQ(c.grid.min, (Vec3{-5.6, -3.6, -2.4}));
  EXPECT_EQ(c.grid.max, (Vec3{5.6, 3.6, 2.4}));
  EXPECT_EQ(c.epochs, 40u);
  EXPECT_EQ(c.batch, 64u);
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.lr_decay_factor, 5.0);
  EXPECT_EQ(c.lr_decay_every, 10u);
  EXPECT_TRUE(parse_config("# only a comment\n\n   \n") == TrackerConfig{});
}

TEST(ParseConfig, SingleOverrideTouchesOnlyThatField) {
  const TrackerConfig c = parse_config("heads = 4\n");
  TrackerConfig expected;
  for (auto& s : expected.backbone.stages) s.heads = 4;
  EXPECT_TRUE(c == expected);
  EXPECT_EQ(parse_config("heads = 1,2,4").backbone.stages[2].heads, 4u);
  EXPECT_EQ(parse_config("lr = 0.01  # faster").lr, 0.01);
}

TEST(ParseConfig, NarrowConfiguration) {
  const TrackerConfig c = parse_config(
      "channels = 8,16,32\ntokens = 64,32,16\nn_template = 128\nn_search = 256\n");
  EXPECT_EQ(c.backbone.stages[0].channels, 8u);
  EXPECT_EQ(c.backbone.stages[2].out_search, 16u);
  EXPECT_EQ(c.n_template, 128u);
  const TrackerConfig two = parse_config("channels = 8,16\ntokens = 32,16\nn_template = 64\n");
  ASSERT_EQ(two.backbone.stages.size(), 2u);
  EXPECT_EQ(two.backbone.stages[1].heads, 2u);
}

TEST(ParseConfig, ErrorsNameTheKeyAndLine) {
  EXPECT_EQ(error_of("headz = 4"), "unknown key 'headz' (line 1)");
  EXPECT_EQ(error_of("# c\nlr = 1e-3\nfoo = 1\n"), "unknown key 'foo' (line 3)");
  const std::string bad = error_of("\nbatch = many\n");
  EXPECT_NE(bad.find("'batch'"), std::string::npos) << bad;
  EXPECT_NE(bad.find("(line 2)"), std::string::npos) << bad;
  EXPECT_NE(error_of("heads = 1,2").find("'heads'"), std::string::npos);
  EXPECT_NE(error_of("channels = 8,16").find("'channels'"), std::string::npos);
  EXPECT_NE(error_of("precision = half").find("'precision'"), std::string::npos);
  EXPECT_NE(error_of("range_x = 3:-3").find("'range_x'"), std::string::npos);
  EXPECT_NE(error_of("lr = 1\nlr = 2").find("duplicate key 'lr'"), std::string::npos);
  EXPECT_NE(error_of("n_template = 10"), "");  // below the first stage token count
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(SerializeConfig, DefaultsRoundTrip) {
  const std::string text = serialize_config(TrackerConfig{});
  EXPECT_TRUE(parse_config(text) == TrackerConfig{});
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(SerializeConfig, RandomConfigsRoundTripIdempotently) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> real(0.01, 3.0);
  std::uniform_int_distribution<std::size_t> small(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    TrackerConfig c;
    const std::size_t stages = small(rng) % 3 + 1;
    c.backbone.stages.clear();
    std::size_t tokens = 8 * small(rng) * 4;
    for (std::size_t s = 0; s < stages; ++s) {
      c.backbone.stages.push_back({4 * small(rng), std::size_t{1} << (small(rng) % 3), tokens,
                                   coin(rng) ? tokens : tokens / 2});
      tokens /= 2;
    }
    c.n_template = c.backbone.template_seeds() + small(rng);
    c.n_search = c.backbone.stages[0].out_search + small(rng);
    c.search_enlarge_xy = real(rng);
    c.search_enlarge_z = real(rng);
    c.template_strategy = coin(rng) ? tracker::TemplateStrategy::kFirst
                                    : tracker::TemplateStrategy::kFirstAndPrevious;
    c.backbone.score = coin(rng) ? backbone::ScoreMode::kLogits : backbone::ScoreMode::kSoftmax;
    c.backbone.knn_k = small(rng);
    c.grid.voxel = coin(rng) ? Vec3{0.25, 0.25, 0.25} : Vec3{real(rng), real(rng), real(rng)};
    c.grid.min = {-real(rng) - 1, -real(rng) - 1, -real(rng) - 1};
    c.grid.max = {real(rng) + 1, real(rng) + 1, real(rng) + 1};
    c.loss = {real(rng), real(rng), real(rng)};
    c.lr = real(rng) * 1e-3;
    c.lr_decay_factor = real(rng) + 1;
    c.jitter_yaw_deg = real(rng);
    c.precision = coin(rng) ? tracker::Precision::kSingle : tracker::Precision::kDouble;
    c.seed = rng();
    const std::string once = serialize_config(c);
    const TrackerConfig back = parse_config(once);
    EXPECT_TRUE(back == c) << once;
    EXPECT_EQ(serialize_config(back), once);
  }
}

TrackerConfig tiny_config() {
  return parse_config(
      "channels = 4,8\ntokens = 8,4\nheads = 1\nknn_k = 4\nn_template = 16\nn_search = 32\n"
      "fuse_channels = 4\nhead_channels = 4\n");
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("synctrack_config_test_" + name);
}

template <typename T>
void expect_same_values(const nn::ParameterSet<T>& a, const nn::ParameterSet<T>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    const auto x = a[i].tensor.values(), y = b[i].tensor.values();
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      ASSERT_EQ(x[k], y[k]) << a[i].name << "[" << k << "]";
    }
  }
}

template <typename T>
void weights_round_trip() {
  const auto path = temp_file("weights.txt");
  const tracker::TrackingModel<T> a(tiny_config(), 1);
  tracker::TrackingModel<T> b(tiny_config(), 2);
  save_weights(path, a.params());
  load_weights(path, b.params());
  expect_same_values(a.params(), b.params());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "SYNCTRACK-WEIGHTS v1");
  std::filesystem::remove(path);
}

TEST(Weights, RoundTripIsExact) {
  weights_round_trip<float>();
  weights_round_trip<double>();
}

TEST(Weights, MismatchesAreRejectedAndLeaveParametersUntouched) {
  const auto path = temp_file("weights_bad.txt");
  const tracker::TrackingModel<double> source(tiny_config(), 1);
  save_weights(path, source.params());
  TrackerConfig wider = tiny_config();
  wider.head.head_channels = 8;
  tracker::TrackingModel<double> target(wider, 3);
  const tracker::TrackingModel<double> pristine(wider, 3);
  try {
    load_weights(path, target.params());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("has shape"), std::string::npos) << e.what();
  }
  expect_same_values(target.params(), pristine.params());

  std::ofstream(path) << "SYNCTRACK-WEIGHTS v1\nbackbone.group.w 3x4 1 2 3\n";
  tracker::TrackingModel<double> m(tiny_config(), 1);
  EXPECT_THROW(load_weights(path, m.params()), DataError);  // too few values, then missing
  std::ofstream(path) << "SYNCTRACK-WEIGHTS v2\n";
  EXPECT_THROW(load_weights(path, m.params()), DataError);
  std::ofstream(path) << "SYNCTRACK-WEIGHTS v1\nnot.a.param 1 0\n";
  EXPECT_THROW(load_weights(path, m.params()), DataError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_weights(path, m.params()), DataError);
}

}  // namespace
}  // namespace synctrack
