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

#include "synctrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "synctrack/errors.hpp"
#include "synctrack/keyvalue.hpp"
#include "synctrack/nn/ops.hpp"
#include "synctrack/sampling.hpp"

namespace synctrack::tracker {

void TrackerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  try {
    backbone.validate();
    grid.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (n_template < backbone.template_seeds()) {
    fail("n_template must be >= the first stage template tokens");
  }
  if (n_search < backbone.stages.front().out_search) {
    fail("n_search must be >= the first stage search tokens");
  }
  if (!(search_enlarge_xy >= 0) || !(search_enlarge_z >= 0)) {
    fail("search enlargement must be >= 0");
  }
  if (min_search_points == 0) fail("min_search_points must be >= 1");
  if (head.fuse_channels == 0 || head.head_channels == 0) fail("head widths must be >= 1");
  if (!(target_radius > 0)) fail("target_radius must be > 0");
  if (!(loss.cls >= 0) || !(loss.reg >= 0) || !(loss.z >= 0)) fail("loss weights must be >= 0");
  if (batch == 0) fail("batch must be >= 1");
  if (!(lr > 0)) fail("lr must be > 0");
  if (!(lr_decay_factor > 0)) fail("lr_decay_factor must be > 0");
  if (lr_decay_every == 0) fail("lr_decay_every must be >= 1");
  if (!(jitter_xy >= 0) || !(jitter_yaw_deg >= 0)) fail("jitter must be >= 0");
}

double learning_rate(const TrackerConfig& config, std::size_t epoch) {
  const auto drops = static_cast<double>(epoch / config.lr_decay_every);
  return config.lr / std::pow(config.lr_decay_factor, drops);
}

template <typename T>
TrackingModel<T>::TrackingModel(const TrackerConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  backbone::add_backbone_params(params_, config_.backbone, rng);
  bev::add_head_params(params_, config_.backbone, config_.head, rng);
}

template <typename T>
bev::HeadOutput<T> TrackingModel<T>::forward(std::span<const std::vector<Vec3>> templates,
                                             std::span<const std::vector<Vec3>> searches,
                                             bool training) {
  if (templates.size() != searches.size() || templates.empty()) {
    throw std::invalid_argument("TrackingModel::forward: need matching non-empty batches");
  }
  std::vector<nn::Tensor<T>> volumes;
  volumes.reserve(templates.size());
  for (std::size_t b = 0; b < templates.size(); ++b) {
    const auto out = backbone::backbone_forward<T>(templates[b], searches[b], config_.backbone,
                                                   params_);
    const auto feats = bev::fuse_multiscale(out, params_);
    volumes.push_back(bev::voxelize<T>(out.search0.coords, feats, config_.grid));
  }
  const auto volume = volumes.size() == 1 ? volumes[0] : nn::concat<T>(volumes, 0);
  return bev::decoder_forward(volume, params_, config_.grid, training);
}

template <typename T>
Box3D ModelLocalizer<T>::localize(const std::vector<Vec3>& tmpl,
                                  const std::vector<Vec3>& search, const Box3D& prev_box,
                                  std::size_t) {
  const auto preds = model_.forward({&tmpl, 1}, {&search, 1}, false);
  return bev::decode_box(preds, 0, model_.config().grid, prev_box).world;
}

Box3D OracleLocalizer::localize(const std::vector<Vec3>&, const std::vector<Vec3>&,
                                const Box3D& prev_box, std::size_t frame) {
  if (frame >= gt_.size()) throw std::out_of_range("OracleLocalizer: frame out of range");
  const Box3D target = geometry::box_to_frame(gt_[frame], prev_box);
  const auto maps = bev::build_targets(target, config_.grid, config_.target_radius);
  return bev::decode_box(bev::predictions_from_targets(maps), 0, config_.grid, prev_box).world;
}

namespace {

std::vector<Vec3> canonical_crop(const PointCloud& frame, const Box3D& box) {
  return geometry::transform_to_box_frame(geometry::crop_points_in_box(frame, box, 0.0), box)
      .points;
}

std::vector<Vec3> resized(std::vector<Vec3> points, std::size_t n, std::uint64_t seed) {
  PointCloud cloud;
  cloud.points = std::move(points);
  return sampling::resize_to_count(cloud, n, seed).points;
}

}  // namespace

TrackResult track_sequence(std::span<const PointCloud> frames, const Box3D& init_box,
                           Localizer& localizer, const TrackerConfig& config) {
  if (frames.empty()) throw std::invalid_argument("track_sequence: no frames");
  std::vector<Vec3> first = canonical_crop(frames[0], init_box);
  if (first.empty()) throw DataError("first frame has no points inside the initial box");
  const std::vector<Vec3> tmpl = resized(first, config.n_template, derive_seed(config.seed, 0));

  TrackResult r;
  r.boxes.push_back(init_box);
  r.carried.push_back(false);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const Box3D prev = r.boxes.back();
    const PointCloud region = geometry::generate_search_region(
        frames[i], prev, config.search_enlarge_xy, config.search_enlarge_z);
    if (region.size() < config.min_search_points) {
      r.boxes.push_back(prev);
      r.carried.push_back(true);
      continue;
    }
    const auto search = resized(region.points, config.n_search, derive_seed(config.seed, i));
    if (config.template_strategy == TemplateStrategy::kFirstAndPrevious && i >= 2) {
      std::vector<Vec3> merged = first;
      const auto last = canonical_crop(frames[i - 1], prev);
      merged.insert(merged.end(), last.begin(), last.end());
      const auto t = resized(std::move(merged), config.n_template,
                             derive_seed(config.seed, frames.size() + i));
      r.boxes.push_back(localizer.localize(t, search, prev, i));
    } else {
      r.boxes.push_back(localizer.localize(tmpl, search, prev, i));
    }
    r.carried.push_back(false);
  }
  return r;
}

std::vector<std::pair<std::size_t, std::size_t>> training_pairs(
    std::span<const Sequence> data) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Sequence& seq = data[s];
    const std::size_t n = std::min(seq.frames.size(), seq.gt.size());
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!geometry::crop_points_in_box(seq.frames[i], seq.gt[i], 0.0).empty()) {
        out.emplace_back(s, i);
      }
    }
  }
  return out;
}

TrainingSample make_training_sample(const Sequence& seq, std::size_t i,
                                    const TrackerConfig& config, std::mt19937_64& rng) {
  if (i + 1 >= seq.frames.size() || i + 1 >= seq.gt.size()) {
    throw std::out_of_range("make_training_sample: frame " + std::to_string(i) +
                            " has no successor in " + seq.name);
  }
  auto crop = canonical_crop(seq.frames[i], seq.gt[i]);
  if (crop.empty()) {
    throw DataError(seq.name + ": frame " + std::to_string(i) + " has an empty template crop");
  }
  std::uniform_real_distribution<double> shift(-config.jitter_xy, config.jitter_xy);
  std::uniform_real_distribution<double> turn(-config.jitter_yaw_deg, config.jitter_yaw_deg);
  const Box3D& gt = seq.gt[i];
  const double dx = shift(rng), dy = shift(rng);
  const double dyaw = turn(rng) * std::numbers::pi / 180.0;
  const Box3D center = Box3D::make(gt.center + Vec3{dx, dy, 0.0}, gt.size, gt.yaw + dyaw);
  const PointCloud region = geometry::generate_search_region(
      seq.frames[i + 1], center, config.search_enlarge_xy, config.search_enlarge_z);
  if (region.empty()) {
    throw DataError(seq.name + ": frame " + std::to_string(i + 1) + " has an empty search region");
  }

  TrainingSample s;
  s.template_points = resized(std::move(crop), config.n_template, rng());
  s.search_points = resized(region.points, config.n_search, rng());
  s.target = geometry::box_to_frame(seq.gt[i + 1], center);
  return s;
}

template <typename T>
TrainResult<T> train_model(std::span<const Sequence> data, const TrackerConfig& config,
                           std::uint64_t seed, std::optional<std::size_t> steps,
                           const std::function<void(std::size_t, const StepRecord&)>& on_step) {
  const auto pairs = training_pairs(data);
  if (pairs.empty()) throw DataError("no usable training pairs");
  TrainResult<T> result{TrackingModel<T>(config, seed), {}};
  TrackingModel<T>& model = result.model;

  const std::size_t per_epoch = (pairs.size() + config.batch - 1) / config.batch;
  const std::size_t total = steps ? *steps : config.epochs * per_epoch;
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::vector<std::size_t> order(pairs.size());

  for (std::size_t epoch = 0; result.trace.size() < total; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = learning_rate(config, epoch);
    for (std::size_t start = 0; start < order.size() && result.trace.size() < total;
         start += config.batch) {
      const std::size_t end = std::min(start + config.batch, order.size());
      std::vector<std::vector<Vec3>> tmpls, searches;
      std::vector<bev::TargetMaps> targets;
      for (std::size_t k = start; k < end; ++k) {
        const auto [s, i] = pairs[order[k]];
        TrainingSample sample = make_training_sample(data[s], i, config, rng);
        tmpls.push_back(std::move(sample.template_points));
        searches.push_back(std::move(sample.search_points));
        targets.push_back(bev::build_targets(sample.target, config.grid, config.target_radius));
      }
      const auto preds = model.forward(tmpls, searches, true);
      const auto loss = bev::detection_loss(preds, std::span<const bev::TargetMaps>(targets),
                                            config.loss);
      model.params().zero_grad();
      loss.total.backward();
      nn::adam_step(model.params(), lr);

      StepRecord rec;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.total = static_cast<double>(loss.total.item());
      rec.focal = loss.focal;
      rec.reg = loss.reg;
      rec.z = loss.z;
      result.trace.push_back(rec);
      if (on_step) on_step(result.trace.size() - 1, rec);
    }
  }
  return result;
}

SequenceMetrics aggregate_metrics(std::span<const SequenceMetrics> rows) {
  SequenceMetrics mean;
  mean.name = "MEAN";
  for (const SequenceMetrics& r : rows) {
    const auto w = static_cast<double>(r.frames);
    mean.frames += r.frames;
    mean.success += w * r.success;
    mean.precision += w * r.precision;
  }
  if (mean.frames == 0) throw std::invalid_argument("aggregate_metrics: no frames");
  mean.success /= static_cast<double>(mean.frames);
  mean.precision /= static_cast<double>(mean.frames);
  return mean;
}

BenchmarkResult run_benchmark(std::span<const Sequence> data, const LocalizerFactory& make,
                              const TrackerConfig& config) {
  BenchmarkResult result;
  for (const Sequence& seq : data) {
    if (seq.gt.size() != seq.frames.size() || seq.frames.empty()) {
      throw std::invalid_argument(seq.name + ": needs one ground-truth box per frame");
    }
    const auto localizer = make(seq);
    TrackResult r = track_sequence(seq.frames, seq.gt[0], *localizer, config);
    const TrackMetrics m = geometry::tracking_metrics(r.boxes, seq.gt);
    result.sequences.push_back({seq.name, seq.frames.size(), m.success, m.precision});
    result.predictions.push_back(std::move(r.boxes));
  }
  result.mean = aggregate_metrics(result.sequences);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const BenchmarkResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "sequence,frames,success,precision\n";
  auto row = [&](const SequenceMetrics& m) {
    out << m.name << ',' << m.frames << ',' << format_real(m.success) << ','
        << format_real(m.precision) << '\n';
  };
  for (const SequenceMetrics& m : result.sequences) row(m);
  row(result.mean);
  if (!out) throw DataError(path.string() + ": write failed");
}

#define SYNCTRACK_INSTANTIATE_TRACKER(T)                                                   \
  template class TrackingModel<T>;                                                         \
  template class ModelLocalizer<T>;                                                        \
  template TrainResult<T> train_model<T>(std::span<const Sequence>, const TrackerConfig&,  \
                                         std::uint64_t, std::optional<std::size_t>,        \
                                         const std::function<void(std::size_t,             \
                                                                  const StepRecord&)>&);

SYNCTRACK_INSTANTIATE_TRACKER(float)
SYNCTRACK_INSTANTIATE_TRACKER(double)

}  // namespace synctrack::tracker
