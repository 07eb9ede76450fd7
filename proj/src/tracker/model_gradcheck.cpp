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

#include "synctrack/model_gradcheck.hpp"

#include <random>

#include "synctrack/backbone.hpp"
#include "synctrack/bevhead.hpp"
#include "synctrack/nn/gradcheck.hpp"
#include "synctrack/nn/ops.hpp"

namespace synctrack {

using Td = nn::Tensor<double>;

nn::NamedCheck apst_detection_gradcheck(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  backbone::BackboneConfig bb;
  bb.knn_k = 4;
  bb.stages = {{16, 2, 5, 6}};
  const bev::HeadConfig head{16, 4};
  bev::VoxelGridConfig grid;
  grid.min = {-1.8, -1.2, -0.6};
  grid.max = {1.8, 1.2, 0.6};  // 12 x 8 x 4, so batch norm never sees a single cell

  nn::ParameterSet<double> ps;
  backbone::add_backbone_params(ps, bb, rng);
  bev::add_head_params(ps, bb, head, rng);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto points = [&](std::size_t n) {
    std::vector<Vec3> p(n);
    for (Vec3& q : p) q = {1.7 * u(rng), 1.1 * u(rng), 0.55 * u(rng)};
    return p;
  };
  const std::vector<Vec3> tcoords = points(5), scoords = points(8);
  const std::vector<bev::TargetMaps> targets{
      bev::build_targets(Box3D::make({u(rng), 0.6 * u(rng), 0.3 * u(rng)}, {0.6, 1.0, 0.4},
                                     u(rng) * 4.0),
                         grid, 1.0)};

  std::vector<Td> inputs{nn::random_tensor({5, 16}, rng, -1, 1),
                         nn::random_tensor({8, 16}, rng, -1, 1)};
  for (const char* name : {"backbone.stage0.entry.w", "backbone.stage0.attn.wq.w",
                           "backbone.stage0.attn.wv.b", "backbone.stage0.ffn1.w",
                           "bev.conv3d0.w", "bev.conv2d1.w", "bev.head.heatmap.w",
                           "bev.head.z.b"}) {
    inputs.push_back(ps.at(name).tensor);
  }
  auto f = [&](const std::vector<Td>& in) {
    const TokenSet<double> t{tcoords, in[0]}, s{scoords, in[1]};
    const auto stage = backbone::apst_stage(t, s, bb.stages[0], bb.score, ps, "backbone.stage0");
    const auto volume =
        bev::voxelize<double>(stage.search_tokens.coords, stage.search_tokens.feats, grid);
    const auto preds = bev::decoder_forward(volume, ps, grid, true);
    const auto loss = bev::detection_loss(preds, std::span<const bev::TargetMaps>(targets));
    // In the full model every token of the stage output flows on; a fixed
    // projection of it stands in for the later stages.
    return nn::add(loss.total, nn::random_projection(stage.record.output, seed + 1));
  };

  nn::NamedCheck check;
  check.name = "apst_stage+detection_loss";
  check.result = nn::finite_diff_gradcheck(f, inputs, 1e-5);
  check.passed = check.result.max_rel_error < tolerance;
  return check;
}

std::vector<nn::NamedCheck> gradcheck_suite(std::uint64_t seed, double tolerance) {
  auto checks = nn::primitive_gradchecks(seed, tolerance);
  checks.push_back(apst_detection_gradcheck(seed, tolerance));
  return checks;
}

}  // namespace synctrack
