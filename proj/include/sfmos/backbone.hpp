/*
 * Copyright 2026 The sfmos Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "sfmos/common.hpp"
#include "sfmos/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace sfmos {

enum class EvalSetting { kImplicit, kExplicit, kCounterfactual };

EvalSetting parse_setting(const std::string& name);
std::string setting_name(EvalSetting s);

// Reserved ids first, then one attribute token per group, then title tokens.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kLike = 1;
  static constexpr int kDislike = 2;
  static constexpr int kTarget = 3;

  int n_groups = 2;
  int n_title = 0;

  int group_token(int g) const { return 4 + g; }
  int title_token(int raw) const { return 4 + n_groups + raw; }
  int size() const { return 4 + n_groups + n_title; }

  static Vocabulary for_dataset(const InteractionDataset& ds);
};

struct RecPrompt {
  std::vector<int> tokens;
  int target_pos = 0;  // index of the TARGET marker
};

constexpr int kMaxPromptLength = 128;

RecPrompt tokenize_rec_prompt(const Sequence& seq, const InteractionDataset& ds,
                              const Vocabulary& vocab, EvalSetting setting,
                              int max_length = kMaxPromptLength);

template <typename S>
struct FrozenScorer {
  int vocab_size = 0;
  int d = 0;
  int hidden = 0;
  std::uint64_t seed = 0;
  S beta = 0;
  Mat<S> embed;  // vocab_size x d
  Mat<S> W1;     // hidden x 2d, acting on [ctx; tgt]
  Vec<S> b1;
  Vec<S> w2;
  S b2 = 0;
};

// Embedding sums of one prompt, split at the TARGET marker.
template <typename S>
struct PooledPrompt {
  Vec<S> ctx_sum;  // tokens up to and including TARGET
  int n_ctx = 0;
  Vec<S> tgt;      // mean over tokens after TARGET
  Vec<S> all_sum;  // every token
  int n_all = 0;

  Vec<S> all_mean() const { return all_sum / S(n_all); }
};

template <typename S>
PooledPrompt<S> pool_prompt(const FrozenScorer<S>& sc, const RecPrompt& p) {
  PooledPrompt<S> out;
  out.ctx_sum = Vec<S>::Zero(sc.d);
  out.tgt = Vec<S>::Zero(sc.d);
  for (int i = 0; i < static_cast<int>(p.tokens.size()); ++i) {
    if (p.tokens[i] < 0 || p.tokens[i] >= sc.vocab_size) throw InputError("token id out of vocabulary");
    auto row = sc.embed.row(p.tokens[i]).transpose();
    if (i <= p.target_pos) {
      out.ctx_sum += row;
      ++out.n_ctx;
    } else {
      out.tgt += row;
    }
  }
  const int n_tgt = static_cast<int>(p.tokens.size()) - out.n_ctx;
  if (n_tgt > 0) out.tgt /= S(n_tgt);
  out.all_sum = out.ctx_sum + out.tgt * S(n_tgt);
  out.n_all = static_cast<int>(p.tokens.size());
  return out;
}

// Logit for pooled inputs; dctx (optional) receives d logit / d ctx.
template <typename S>
S scorer_logit(const FrozenScorer<S>& sc, const Vec<S>& ctx, const Vec<S>& tgt,
               Vec<S>* dctx = nullptr) {
  const Vec<S> a = sc.W1.leftCols(sc.d) * ctx + sc.W1.rightCols(sc.d) * tgt + sc.b1;
  const Vec<S> h = a.array().tanh().matrix();
  if (dctx) {
    const Vec<S> da = (sc.w2.array() * (S(1) - h.array().square())).matrix() * sc.beta;
    *dctx = sc.W1.leftCols(sc.d).transpose() * da;
  }
  return sc.beta * (sc.w2.dot(h) + sc.b2);
}

template <typename S>
S logistic(S z) {
  return z >= S(0) ? S(1) / (S(1) + std::exp(-z)) : std::exp(z) / (S(1) + std::exp(z));
}

// Context vector after prepending the soft-prompt rows of e.
template <typename S>
Vec<S> context_with_prompt(const PooledPrompt<S>& pp, const Mat<S>& e) {
  Vec<S> sum = pp.ctx_sum;
  if (e.rows() > 0) sum += e.colwise().sum().transpose();
  return sum / S(pp.n_ctx + e.rows());
}

template <typename S>
S score(const FrozenScorer<S>& sc, const Mat<S>& e, const RecPrompt& prompt) {
  if (e.rows() > 0 && e.cols() != sc.d) throw InputError("soft prompt width differs from scorer d");
  const auto pp = pool_prompt(sc, prompt);
  return logistic(scorer_logit(sc, context_with_prompt(pp, e), pp.tgt));
}

// Returns y and fills grad (L x d) with dy/de.
template <typename S>
S score_with_input_grad(const FrozenScorer<S>& sc, const Mat<S>& e, const RecPrompt& prompt,
                        Mat<S>* grad) {
  if (e.rows() > 0 && e.cols() != sc.d) throw InputError("soft prompt width differs from scorer d");
  const auto pp = pool_prompt(sc, prompt);
  Vec<S> dctx;
  const S y = logistic(scorer_logit(sc, context_with_prompt(pp, e), pp.tgt, &dctx));
  const Vec<S> row = dctx * (y * (S(1) - y) / S(pp.n_ctx + e.rows()));
  grad->resize(e.rows(), sc.d);
  for (Eigen::Index l = 0; l < e.rows(); ++l) grad->row(l) = row.transpose();
  return y;
}

// Planted stereotype geometry.
struct PlantedBias {
  double attribute_scale = 6.0;
  double alpha = 2.0;       // probe weight on the context direction
  double alpha_target = 2.0;
  double theta = 6.0;       // probe threshold
  double probe_weight = 1.0;
  // Suppression units: fire when the context leans to a group but the target does not.
  double suppress_alpha = 4.0;
  double suppress_alpha_target = 6.0;
  double suppress_theta = 1.5;
  double suppress_weight = 1.0;  // 0 disables
  double readout_scale = 1.0;
  double embed_scale = 1.0;
};

// title_pool[t]: group of raw title token t (-1 for none); title_strength[t]: shift multiplier.
// Weights are rounded to float32 so a saved scorer reloads bit-identically.
FrozenScorer<double> make_frozen_scorer(const Vocabulary& vocab, int d, int hidden,
                                        std::uint64_t seed, double beta, const PlantedBias& planted,
                                        const std::vector<int>& title_pool,
                                        const std::vector<double>& title_strength);

// Sets b2 so the median logit over the prompts is zero.
void calibrate_offset(FrozenScorer<double>& sc, const std::vector<RecPrompt>& prompts);

// Serialized bytes without the trailing digest.
std::string scorer_payload(const FrozenScorer<double>& sc);
std::string weights_digest(const FrozenScorer<double>& sc);
void save_scorer(const FrozenScorer<double>& sc, const std::string& path);
FrozenScorer<double> load_scorer(const std::string& path);

}  // namespace sfmos
