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

#include "sfmos/backbone.hpp"
#include "sfmos/common.hpp"

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace sfmos {

struct StereotypeTemplateSet {
  std::vector<std::vector<int>> templates;  // one per group, in group_set order
};

// Each group's attribute token repeated three times.
StereotypeTemplateSet default_templates(const Vocabulary& vocab);

template <typename S>
struct MoSParams {
  int N = 4;
  int L = 5;
  int K = 1;
  int d = 0;
  bool static_experts = false;  // experts ignore the prompt and emit their bias
  Mat<S> router_w;              // N x d
  Vec<S> router_b;              // N
  Mat<S> reweight_w;            // N x N
  Vec<S> reweight_b;            // N
  std::vector<Mat<S>> expert_w; // N of (L*d) x d
  std::vector<Vec<S>> expert_b; // N of L*d

  void validate() const;
  // Flat view used by optimizers and gradient checks.
  std::size_t size() const;
  Vec<S> flatten() const;
  void unflatten(const Vec<S>& v);
};

template <typename S>
MoSParams<S> zero_like(const MoSParams<S>& p);

MoSParams<double> init_mos(int N, int L, int K, int d, std::uint64_t seed, double init_scale,
                           bool static_experts = false);

// Pair i is [template_i ; c^rec]. Only the router sees these.
std::vector<std::vector<int>> multi_stereotype_prompting(const RecPrompt& prompt,
                                                         const StereotypeTemplateSet& templates);

template <typename S>
Vec<S> softmax(const Vec<S>& x) {
  const S m = x.maxCoeff();
  Vec<S> e = (x.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename S>
Vec<S> mean_embedding(const Mat<S>& embed, const std::vector<int>& tokens) {
  Vec<S> x = Vec<S>::Zero(embed.cols());
  if (tokens.empty()) return x;
  for (int t : tokens) x += embed.row(t).transpose();
  return x / S(tokens.size());
}

template <typename S>
Vec<S> route_pooled(const MoSParams<S>& p, const Vec<S>& x) {
  return softmax<S>(p.router_w * x + p.router_b);
}

template <typename S>
Vec<S> route(const MoSParams<S>& p, const Mat<S>& embed, const std::vector<int>& tokens) {
  if (embed.cols() != p.d) throw InputError("router width differs from embedding width");
  return route_pooled(p, mean_embedding<S>(embed, tokens));
}

// Indices of the K largest entries; ties go to the lower index.
template <typename S>
std::vector<int> topk_indices(const Vec<S>& p, int K) {
  if (K < 1 || K > p.size()) throw InputError("top-K out of range");
  std::vector<int> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p(a) > p(b); });
  idx.resize(K);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename S>
Vec<S> topk_mask(const Vec<S>& p, int K) {
  auto keep = topk_indices(p, K);
  Vec<S> kept(K);
  for (int i = 0; i < K; ++i) kept(i) = p(keep[i]);
  Vec<S> sm = softmax<S>(kept);
  Vec<S> out = Vec<S>::Zero(p.size());
  for (int i = 0; i < K; ++i) out(keep[i]) = sm(i);
  return out;
}

// masked: one row per variant.
template <typename S>
Vec<S> reweight(const MoSParams<S>& p, const Mat<S>& masked, Vec<S>* avg_out = nullptr) {
  Vec<S> avg = masked.colwise().mean().transpose();
  if (avg_out) *avg_out = avg;
  return softmax<S>(p.reweight_w * avg + p.reweight_b);
}

// E_n as an L x d block.
template <typename S>
Mat<S> expert_output(const MoSParams<S>& p, int n, const Vec<S>& x_rec) {
  Vec<S> flat = p.static_experts ? Vec<S>(p.expert_b[n]) : Vec<S>(p.expert_w[n] * x_rec + p.expert_b[n]);
  Mat<S> out(p.L, p.d);
  for (int l = 0; l < p.L; ++l) out.row(l) = flat.segment(l * p.d, p.d).transpose();
  return out;
}

template <typename S>
Mat<S> expert_prompts(const MoSParams<S>& p, const Vec<S>& x_rec, const Vec<S>& w) {
  Mat<S> e = Mat<S>::Zero(p.L, p.d);
  for (int n = 0; n < p.N; ++n) e += w(n) * expert_output(p, n, x_rec);
  return e;
}

template <typename S>
struct RoutingTrace {
  Mat<S> raw;     // G x N
  Mat<S> masked;  // G x N
  Vec<S> avg;     // N
  Vec<S> w;       // N
  Mat<S> e;       // L x d
  S y = 0;
  // Cached for backward.
  Mat<S> variant_x;                  // G x d
  Vec<S> x_rec;                      // d
  std::vector<std::vector<int>> kept;
  Vec<S> dctx;                       // d logit / d ctx
  int n_ctx = 0;
  std::vector<int> backbone_tokens;
};

// Embedding sum and length of each template, computed once per scorer.
template <typename S>
struct TemplateCache {
  std::vector<Vec<S>> sums;
  std::vector<int> lengths;
};

template <typename S>
TemplateCache<S> cache_templates(const FrozenScorer<S>& sc, const StereotypeTemplateSet& templates) {
  TemplateCache<S> c;
  for (auto& t : templates.templates) {
    Vec<S> sum = Vec<S>::Zero(sc.d);
    for (int tok : t) {
      if (tok < 0 || tok >= sc.vocab_size) throw InputError("template token out of vocabulary");
      sum += sc.embed.row(tok).transpose();
    }
    c.sums.push_back(sum);
    c.lengths.push_back(static_cast<int>(t.size()));
  }
  return c;
}

template <typename S>
RoutingTrace<S> mos_forward_pooled(const MoSParams<S>& p, const FrozenScorer<S>& sc,
                                   const PooledPrompt<S>& pp, const TemplateCache<S>& tc) {
  if (sc.d != p.d) throw InputError("MoS width differs from scorer d");
  const int G = static_cast<int>(tc.sums.size());
  RoutingTrace<S> t;
  t.x_rec = pp.all_mean();
  t.raw.resize(G, p.N);
  t.masked.resize(G, p.N);
  t.variant_x.resize(G, p.d);
  for (int g = 0; g < G; ++g) {
    // Mean over [template; c^rec].
    const Vec<S> x = (pp.all_sum + tc.sums[g]) / S(pp.n_all + tc.lengths[g]);
    t.variant_x.row(g) = x.transpose();
    const Vec<S> raw = route_pooled(p, x);
    t.raw.row(g) = raw.transpose();
    t.kept.push_back(topk_indices(raw, p.K));
    t.masked.row(g) = topk_mask(raw, p.K).transpose();
  }
  t.w = reweight(p, t.masked, &t.avg);
  t.e = expert_prompts(p, t.x_rec, t.w);
  t.n_ctx = pp.n_ctx + p.L;
  t.y = logistic(scorer_logit(sc, context_with_prompt(pp, t.e), pp.tgt, &t.dctx));
  return t;
}

template <typename S>
RoutingTrace<S> mos_forward(const MoSParams<S>& p, const FrozenScorer<S>& sc, const RecPrompt& prompt,
                            const StereotypeTemplateSet& templates) {
  auto t = mos_forward_pooled(p, sc, pool_prompt(sc, prompt), cache_templates(sc, templates));
  t.backbone_tokens = prompt.tokens;
  return t;
}

std::string mos_payload(const MoSParams<double>& p, const StereotypeTemplateSet& templates);
void save_mos(const MoSParams<double>& p, const StereotypeTemplateSet& templates,
              const std::string& path);
MoSParams<double> load_mos(const std::string& path, StereotypeTemplateSet* templates);

}  // namespace sfmos
