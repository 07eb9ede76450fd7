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

#ifndef SYNCTRACK_TRACKER_HPP_
#define SYNCTRACK_TRACKER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synctrack/backbone.hpp"
#include "synctrack/bevhead.hpp"
#include "synctrack/geometry.hpp"
#include "synctrack/nn/parameter.hpp"
#include "synctrack/synthdata.hpp"

namespace synctrack::tracker {

// kFirstAndPrevious merges the first-frame crop with the crop of the
// previous prediction before resampling to n_template.
enum class TemplateStrategy { kFirst, kFirstAndPrevious };
enum class Precision { kSingle, kDouble };

struct TrackerConfig {
  std::size_t n_template = 512;
  std::size_t n_search = 1024;
  // Growth of the previous box on every side before cropping the search region.
  double search_enlarge_xy = 2.0;
  double search_enlarge_z = 1.0;
  // Fewer search points than this carries the previous box forward.
  std::size_t min_search_points = 5;
  TemplateStrategy template_strategy = TemplateStrategy::kFirst;
  backbone::BackboneConfig backbone;
  bev::HeadConfig head;
  bev::VoxelGridConfig grid;
  double target_radius = 2.0;
  bev::LossWeights loss;

  std::size_t epochs = 40;
  std::size_t batch = 64;
  double lr = 1e-3;
  double lr_decay_factor = 5.0;
  std::size_t lr_decay_every = 10;
  // Uniform jitter of the search-region centre (m, x and y) and yaw (degrees)
  // for training samples.
  double jitter_xy = 0.3;
  double jitter_yaw_deg = 5.0;

  Precision precision = Precision::kSingle;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Learning rate in effect during `epoch` (0-based).
double learning_rate(const TrackerConfig& config, std::size_t epoch);

template <typename T>
class TrackingModel {
 public:
  // Parameters are initialized from `seed`.
  TrackingModel(const TrackerConfig& config, std::uint64_t seed);

  const TrackerConfig& config() const { return config_; }
  nn::ParameterSet<T>& params() { return params_; }
  const nn::ParameterSet<T>& params() const { return params_; }

  // One element per (template, search) pair, both in canonical frames.
  bev::HeadOutput<T> forward(std::span<const std::vector<Vec3>> templates,
                             std::span<const std::vector<Vec3>> searches, bool training);

 private:
  TrackerConfig config_;
  nn::ParameterSet<T> params_;
};

// Predicts the target in the current frame. `tmpl` lives in the template's
// canonical frame and `search` in prev_box's frame.
class Localizer {
 public:
  virtual ~Localizer() = default;
  virtual Box3D localize(const std::vector<Vec3>& tmpl, const std::vector<Vec3>& search,
                         const Box3D& prev_box, std::size_t frame) = 0;
};

template <typename T>
class ModelLocalizer : public Localizer {
 public:
  explicit ModelLocalizer(TrackingModel<T>& model) : model_(model) {}
  Box3D localize(const std::vector<Vec3>& tmpl, const std::vector<Vec3>& search,
                 const Box3D& prev_box, std::size_t frame) override;

 private:
  TrackingModel<T>& model_;
};

// Decodes perfect head outputs built from the ground truth.
class OracleLocalizer : public Localizer {
 public:
  OracleLocalizer(std::vector<Box3D> gt, const TrackerConfig& config)
      : gt_(std::move(gt)), config_(config) {}
  Box3D localize(const std::vector<Vec3>& tmpl, const std::vector<Vec3>& search,
                 const Box3D& prev_box, std::size_t frame) override;

 private:
  std::vector<Box3D> gt_;
  TrackerConfig config_;
};

// Never moves: every frame repeats the previous box, i.e. the initial box.
class StationaryLocalizer : public Localizer {
 public:
  Box3D localize(const std::vector<Vec3>&, const std::vector<Vec3>&, const Box3D& prev_box,
                 std::size_t) override {
    return prev_box;
  }
};

struct TrackResult {
  std::vector<Box3D> boxes;
  // Frames whose search region was too sparse and reused the previous box.
  std::vector<bool> carried;
};

// Throws DataError when the first frame has no points inside init_box.
TrackResult track_sequence(std::span<const PointCloud> frames, const Box3D& init_box,
                           Localizer& localizer, const TrackerConfig& config);

struct TrainingSample {
  std::vector<Vec3> template_points;
  std::vector<Vec3> search_points;
  // Ground truth in the search region's frame.
  Box3D target;
};

// Frame pairs (sequence, i) usable for training: frame i's ground truth
// crops a non-empty template and frame i + 1 exists.
std::vector<std::pair<std::size_t, std::size_t>> training_pairs(
    std::span<const Sequence> data);

// Template from frame i cropped by its ground truth, search region from
// frame i + 1 around a jittered copy of that box.
TrainingSample make_training_sample(const Sequence& seq, std::size_t i,
                                    const TrackerConfig& config, std::mt19937_64& rng);

struct StepRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double focal = 0.0;
  double reg = 0.0;
  double z = 0.0;
};

template <typename T>
struct TrainResult {
  TrackingModel<T> model;
  std::vector<StepRecord> trace;
};

// Runs config.epochs epochs over shuffled pairs, or exactly `steps` steps
// when given. Throws DataError when no training pair exists.
template <typename T>
TrainResult<T> train_model(std::span<const Sequence> data, const TrackerConfig& config,
                           std::uint64_t seed, std::optional<std::size_t> steps = {},
                           const std::function<void(std::size_t, const StepRecord&)>&
                               on_step = {});

struct SequenceMetrics {
  std::string name;
  std::size_t frames = 0;
  double success = 0.0;
  double precision = 0.0;
};

struct BenchmarkResult {
  std::vector<SequenceMetrics> sequences;
  std::vector<std::vector<Box3D>> predictions;
  SequenceMetrics mean;
};

// Frame-weighted mean, named "MEAN". Throws std::invalid_argument when empty
// or when no frames are present.
SequenceMetrics aggregate_metrics(std::span<const SequenceMetrics> rows);

using LocalizerFactory = std::function<std::unique_ptr<Localizer>(const Sequence&)>;

// Tracks every sequence from its first ground-truth box.
BenchmarkResult run_benchmark(std::span<const Sequence> data, const LocalizerFactory& make,
                              const TrackerConfig& config);

// Header `sequence,frames,success,precision`, one row per sequence and a
// final MEAN row.
void write_metrics_csv(const std::filesystem::path& path, const BenchmarkResult& result);

}  // namespace synctrack::tracker

#endif  // SYNCTRACK_TRACKER_HPP_
