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

#ifndef SYNCTRACK_BACKBONE_HPP_
#define SYNCTRACK_BACKBONE_HPP_

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "synctrack/geometry.hpp"
#include "synctrack/nn/parameter.hpp"
#include "synctrack/nn/tensor.hpp"
#include "synctrack/sampling.hpp"
#include "synctrack/token_set.hpp"

namespace synctrack::backbone {

struct StageConfig {
  std::size_t channels = 32;
  std::size_t heads = 2;
  std::size_t out_template = 256;
  std::size_t out_search = 256;
};

// How search tokens are ranked after attention. kLogits averages the scaled
// pre-softmax template-to-search scores; kSoftmax averages the attention
// weights instead (experimental).
enum class ScoreMode { kLogits, kSoftmax };

struct BackboneConfig {
  std::size_t knn_k = 16;
  std::size_t ffn_ratio = 2;
  std::vector<StageConfig> stages{{32, 2, 256, 256}, {64, 2, 128, 128}, {128, 2, 64, 64}};
  ScoreMode score = ScoreMode::kLogits;

  // The template is reduced to this many seeds before grouping.
  std::size_t template_seeds() const { return stages.front().out_template; }
  std::size_t group_channels() const { return stages.front().channels; }

  // Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

template <typename T>
struct AttentionRecord {
  std::size_t n_template = 0;
  std::size_t n_search = 0;
  // Per head, [N, N] with N = n_template + n_search; rows are queries.
  std::vector<nn::Tensor<T>> logits;
  std::vector<nn::Tensor<T>> attn;
  // Residual output [N, C]: template rows first, then search rows.
  nn::Tensor<T> output;
};

template <typename T>
struct StageOutput {
  TokenSet<T> template_tokens;
  TokenSet<T> search_tokens;
  AttentionRecord<T> record;
};

template <typename T>
struct BackboneOutput {
  // Grouped search points before any attention, at full search resolution.
  TokenSet<T> search0;
  std::vector<StageOutput<T>> stages;
};

// Registers prefix.{wq,bq,wk,bk,wv,bv,wo,bo} for width `channels`.
template <typename T>
void add_attention_params(nn::ParameterSet<T>& ps, const std::string& prefix,
                          std::size_t channels, std::mt19937_64& rng);

// Registers every backbone parameter under "backbone.".
template <typename T>
void add_backbone_params(nn::ParameterSet<T>& ps, const BackboneConfig& config,
                         std::mt19937_64& rng);

template <typename T>
nn::Tensor<T> positional_embedding(std::span<const Vec3> coords,
                                   const nn::Tensor<T>& weight,
                                   const nn::Tensor<T>& bias);

// Self-attention over the stacked template and search features with one
// softmax per query row across all keys, followed by the output map and a
// residual connection.
template <typename T>
AttentionRecord<T> multi_head_joint_attention(const nn::Tensor<T>& template_feats,
                                              const nn::Tensor<T>& search_feats,
                                              std::size_t heads,
                                              const nn::ParameterSet<T>& ps,
                                              const std::string& prefix);

// Attention rows for the search queries alone, against the full key set.
// One [n_search, N] matrix per head.
template <typename T>
std::vector<nn::Tensor<T>> search_query_attention(const nn::Tensor<T>& template_feats,
                                                  const nn::Tensor<T>& search_feats,
                                                  std::size_t heads,
                                                  const nn::ParameterSet<T>& ps,
                                                  const std::string& prefix);

// Mean over template query rows and heads of each search column.
template <typename T>
std::vector<double> attentive_scores(const AttentionRecord<T>& record,
                                     ScoreMode mode = ScoreMode::kLogits);

// The k best-scoring search tokens (ties to the lower index), returned in
// ascending index order with their scores.
sampling::SampleSelection top_k_ascending(std::span<const double> scores, std::size_t k);

template <typename T>
sampling::SampleSelection attentive_sample(const AttentionRecord<T>& record, std::size_t k,
                                           ScoreMode mode = ScoreMode::kLogits);

template <typename T>
StageOutput<T> apst_stage(const TokenSet<T>& template_tokens,
                          const TokenSet<T>& search_tokens, const StageConfig& stage,
                          ScoreMode mode,
                          const nn::ParameterSet<T>& ps, const std::string& prefix);

template <typename T>
BackboneOutput<T> backbone_forward(std::span<const Vec3> template_points,
                                   std::span<const Vec3> search_points,
                                   const BackboneConfig& config,
                                   const nn::ParameterSet<T>& ps);

}  // namespace synctrack::backbone

#endif  // SYNCTRACK_BACKBONE_HPP_
