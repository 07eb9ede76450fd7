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

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "synctrack/config.hpp"
#include "synctrack/errors.hpp"
#include "synctrack/keyvalue.hpp"
#include "synctrack/model_gradcheck.hpp"
#include "synctrack/synthdata.hpp"
#include "synctrack/tracker.hpp"
#include "synctrack/weights.hpp"

namespace fs = std::filesystem;
using namespace synctrack;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kCheckFailed = 3;

tracker::TrackerConfig config_or_defaults(const std::string& path) {
  return path.empty() ? tracker::TrackerConfig{} : load_config(path);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
  const synth::DatasetSpec spec = synth::load_dataset_spec(spec_path);
  const auto data = synth::generate_dataset(spec, seed);
  synth::write_dataset(out, data);
  std::printf("wrote %zu sequences of %zu frames to %s\n", data.size(), spec.frames,
              out.c_str());
  return kOk;
}

template <typename T>
int train_as(const tracker::TrackerConfig& cfg, const std::vector<Sequence>& data,
             const std::string& out, std::optional<std::size_t> steps,
             const std::string& trace_path) {
  const auto result = tracker::train_model<T>(
      data, cfg, cfg.seed, steps, [](std::size_t i, const tracker::StepRecord& r) {
        if (i % 10 == 0) {
          std::fprintf(stderr, "step %zu epoch %zu lr %g loss %.5f (focal %.5f reg %.5f z %.5f)\n",
                       i, r.epoch, r.lr, r.total, r.focal, r.reg, r.z);
        }
      });
  save_weights(out, result.model.params());
  if (!trace_path.empty()) {
    std::ofstream csv(trace_path);
    if (!csv) throw DataError(trace_path + ": cannot open for writing");
    csv << "step,epoch,lr,total,focal,reg,z\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      const auto& r = result.trace[i];
      csv << i << ',' << r.epoch << ',' << format_real(r.lr) << ',' << format_real(r.total) << ','
          << format_real(r.focal) << ',' << format_real(r.reg) << ',' << format_real(r.z) << '\n';
    }
  }
  if (!result.trace.empty()) {
    std::printf("trained %zu steps; loss %.5f -> %.5f\n", result.trace.size(),
                result.trace.front().total, result.trace.back().total);
  } else {
    std::printf("trained 0 steps\n");
  }
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out,
              std::optional<std::size_t> steps, const std::string& trace_path) {
  const auto cfg = config_or_defaults(config_path);
  const auto data = synth::read_dataset(data_dir);
  if (cfg.precision == tracker::Precision::kDouble) {
    return train_as<double>(cfg, data, out, steps, trace_path);
  }
  return train_as<float>(cfg, data, out, steps, trace_path);
}

void print_metrics(const tracker::BenchmarkResult& r) {
  for (const auto& m : r.sequences) {
    std::printf("%s frames %zu success %.2f precision %.2f\n", m.name.c_str(), m.frames,
                m.success, m.precision);
  }
  std::printf("MEAN frames %zu success %.2f precision %.2f\n", r.mean.frames, r.mean.success,
              r.mean.precision);
}

template <typename T>
int track_as(const tracker::TrackerConfig& cfg, const std::string& weights,
             const std::string& data_dir, const std::string& out) {
  tracker::TrackingModel<T> model(cfg, cfg.seed);
  load_weights(weights, model.params());
  const auto data = synth::read_dataset(data_dir);
  const auto result = tracker::run_benchmark(
      data,
      [&](const Sequence&) { return std::make_unique<tracker::ModelLocalizer<T>>(model); },
      cfg);
  for (std::size_t i = 0; i < data.size(); ++i) {
    synth::write_boxes(fs::path(data_dir) / data[i].name / "pred.boxes", result.predictions[i]);
  }
  tracker::write_metrics_csv(out, result);
  print_metrics(result);
  return kOk;
}

int cmd_track(const std::string& config_path, const std::string& weights,
              const std::string& data_dir, const std::string& out) {
  const auto cfg = config_or_defaults(config_path);
  if (cfg.precision == tracker::Precision::kDouble) {
    return track_as<double>(cfg, weights, data_dir, out);
  }
  return track_as<float>(cfg, weights, data_dir, out);
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out) {
  if (!fs::is_directory(gt_dir)) throw DataError(gt_dir + ": not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  tracker::BenchmarkResult result;
  for (const fs::path& dir : dirs) {
    const std::string name = dir.filename().string();
    const auto gt = synth::read_boxes(dir / "gt.boxes");
    const fs::path pred_path = fs::path(pred_dir) / name / "pred.boxes";
    if (!fs::exists(pred_path)) throw DataError(pred_path.string() + ": missing");
    const auto pred = synth::read_boxes(pred_path);
    if (pred.size() != gt.size() || gt.empty()) {
      throw DataError(pred_path.string() + ": " + std::to_string(pred.size()) + " boxes for " +
                      std::to_string(gt.size()) + " ground-truth frames");
    }
    const TrackMetrics m = geometry::tracking_metrics(pred, gt);
    result.sequences.push_back({name, gt.size(), m.success, m.precision});
  }
  if (result.sequences.empty()) throw DataError(gt_dir + ": no sequences");
  result.mean = tracker::aggregate_metrics(result.sequences);
  tracker::write_metrics_csv(out, result);
  print_metrics(result);
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  const auto checks = gradcheck_suite(seed);
  std::size_t failed = 0;
  for (const auto& c : checks) {
    std::printf("%s %-28s max_rel_error %.3g over %zu entries\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.result.max_rel_error, c.result.checked);
    failed += c.passed ? 0 : 1;
  }
  std::printf("%zu/%zu checks passed (tolerance %g, epsilon 1e-5)\n", checks.size() - failed,
              checks.size(), nn::kGradCheckTolerance);
  return failed == 0 ? kOk : kCheckFailed;
}

int cmd_info(const std::string& config_path) {
  const auto cfg = config_or_defaults(config_path);
  std::vector<std::size_t> channels, heads, tmpl, search;
  for (const auto& s : cfg.backbone.stages) {
    channels.push_back(s.channels);
    heads.push_back(s.heads);
    tmpl.push_back(s.out_template);
    search.push_back(s.out_search);
  }
  const auto& g = cfg.grid;
  std::printf("n_template: %zu\n", cfg.n_template);
  std::printf("n_search: %zu\n", cfg.n_search);
  std::printf("stage_template_tokens: %s\n", join(tmpl).c_str());
  std::printf("stage_search_tokens: %s\n", join(search).c_str());
  std::printf("stage_channels: %s\n", join(channels).c_str());
  std::printf("stage_heads: %s\n", join(heads).c_str());
  std::printf("knn_k: %zu\n", cfg.backbone.knn_k);
  std::printf("grid: %zu,%zu,%zu\n", g.nx(), g.ny(), g.nz());
  std::printf("voxel: %s,%s,%s\n", format_real(g.voxel.x).c_str(),
              format_real(g.voxel.y).c_str(), format_real(g.voxel.z).c_str());
  std::printf("range: x %s:%s y %s:%s z %s:%s\n", format_real(g.min.x).c_str(),
              format_real(g.max.x).c_str(), format_real(g.min.y).c_str(),
              format_real(g.max.y).c_str(), format_real(g.min.z).c_str(),
              format_real(g.max.z).c_str());
  std::printf("search_enlarge: xy %s z %s\n", format_real(cfg.search_enlarge_xy).c_str(),
              format_real(cfg.search_enlarge_z).c_str());
  std::printf("loss_weights: %s,%s,%s\n", format_real(cfg.loss.cls).c_str(),
              format_real(cfg.loss.reg).c_str(), format_real(cfg.loss.z).c_str());
  std::printf("schedule: epochs %zu batch %zu lr %s decay /%s every %zu epochs\n", cfg.epochs,
              cfg.batch, format_real(cfg.lr).c_str(), format_real(cfg.lr_decay_factor).c_str(),
              cfg.lr_decay_every);
  const tracker::TrackingModel<float> model(cfg, cfg.seed);
  const auto& ps = model.params();
  std::printf("params_backbone: %zu\n", ps.count("backbone."));
  std::printf("params_bevhead: %zu\n", ps.count("bev."));
  std::printf("params_total: %zu\n", ps.count());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synctrack: point cloud single-object tracker"};
  app.require_subcommand(1);
  int code = kOk;

  std::string spec, out, config, data, weights, pred, gt, trace;
  std::uint64_t seed = 0;
  std::optional<std::size_t> steps;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec, "dataset spec file")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "generator seed")->required();
  synth->callback([&] { code = cmd_synth(spec, out, seed); });

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config, "config file (defaults when omitted)");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out, "weights file to write")->required();
  train->add_option("--steps", steps, "exact number of optimizer steps");
  train->add_option("--trace", trace, "per-step loss CSV");
  train->callback([&] { code = cmd_train(config, data, out, steps, trace); });

  auto* track = app.add_subcommand("track", "track every sequence of a dataset");
  track->add_option("--config", config, "config file (defaults when omitted)");
  track->add_option("--weights", weights, "weights file")->required();
  track->add_option("--data", data, "dataset directory")->required();
  track->add_option("--out", out, "metrics CSV")->required();
  track->callback([&] { code = cmd_track(config, weights, data, out); });

  auto* eval = app.add_subcommand("eval", "score predicted boxes against ground truth");
  eval->add_option("--pred", pred, "directory of seq_*/pred.boxes")->required();
  eval->add_option("--gt", gt, "dataset directory")->required();
  eval->add_option("--out", out, "metrics CSV")->required();
  eval->callback([&] { code = cmd_eval(pred, gt, out); });

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--seed", seed, "seed for the random inputs");
  gradcheck->callback([&] { code = cmd_gradcheck(seed); });

  auto* info = app.add_subcommand("info", "print configuration and parameter counts");
  info->add_option("--config", config, "config file (defaults when omitted)");
  info->callback([&] { code = cmd_info(config); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return code;
}
