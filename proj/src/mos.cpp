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

#include "sfmos/mos.hpp"

#include "binio.hpp"

#include <random>

namespace sfmos {

StereotypeTemplateSet default_templates(const Vocabulary& vocab) {
  StereotypeTemplateSet t;
  for (int g = 0; g < vocab.n_groups; ++g) t.templates.push_back(std::vector<int>(3, vocab.group_token(g)));
  return t;
}

template <typename S>
void MoSParams<S>::validate() const {
  if (N < 1 || L < 1 || d < 1) throw InputError("MoS N, L and d must be >= 1");
  if (K < 1 || K > N) throw InputError("MoS K must lie in [1, N]");
  if (router_w.rows() != N || router_w.cols() != d || router_b.size() != N ||
      reweight_w.rows() != N || reweight_w.cols() != N || reweight_b.size() != N ||
      static_cast<int>(expert_w.size()) != N || static_cast<int>(expert_b.size()) != N)
    throw InputError("MoS parameter shapes inconsistent");
  for (int n = 0; n < N; ++n)
    if (expert_w[n].rows() != L * d || expert_w[n].cols() != d || expert_b[n].size() != L * d)
      throw InputError("MoS expert shapes inconsistent");
}

template <typename S>
std::size_t MoSParams<S>::size() const {
  return static_cast<std::size_t>(N) * d + N + N * N + N +
         static_cast<std::size_t>(N) * (L * d) * d + static_cast<std::size_t>(N) * L * d;
}

template <typename S>
Vec<S> MoSParams<S>::flatten() const {
  Vec<S> v(size());
  Eigen::Index o = 0;
  auto put = [&](const auto& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) v(o++) = m(r, c);
  };
  put(router_w);
  put(router_b);
  put(reweight_w);
  put(reweight_b);
  for (auto& m : expert_w) put(m);
  for (auto& b : expert_b) put(b);
  return v;
}

template <typename S>
void MoSParams<S>::unflatten(const Vec<S>& v) {
  if (static_cast<std::size_t>(v.size()) != size()) throw InputError("flat parameter size mismatch");
  Eigen::Index o = 0;
  auto get = [&](auto& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = v(o++);
  };
  get(router_w);
  get(router_b);
  get(reweight_w);
  get(reweight_b);
  for (auto& m : expert_w) get(m);
  for (auto& b : expert_b) get(b);
}

template <typename S>
MoSParams<S> zero_like(const MoSParams<S>& p) {
  MoSParams<S> z = p;
  z.router_w.setZero();
  z.router_b.setZero();
  z.reweight_w.setZero();
  z.reweight_b.setZero();
  for (auto& m : z.expert_w) m.setZero();
  for (auto& b : z.expert_b) b.setZero();
  return z;
}

template struct MoSParams<double>;
template MoSParams<double> zero_like(const MoSParams<double>&);

MoSParams<double> init_mos(int N, int L, int K, int d, std::uint64_t seed, double init_scale,
                           bool static_experts) {
  MoSParams<double> p;
  p.N = N;
  p.L = L;
  p.K = K;
  p.d = d;
  p.static_experts = static_experts;
  if (N < 1 || L < 1 || d < 1) throw InputError("MoS N, L and d must be >= 1");
  if (K < 1 || K > N) throw InputError("MoS K must lie in [1, N]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng) * init_scale;
  };
  p.router_w.resize(N, d);
  fill(p.router_w);
  p.router_b = VectorXd::Zero(N);
  p.reweight_w.resize(N, N);
  fill(p.reweight_w);
  p.reweight_b = VectorXd::Zero(N);
  for (int n = 0; n < N; ++n) {
    MatrixXd w(L * d, d);
    VectorXd b = VectorXd::Zero(L * d);
    if (static_experts) {
      w.setZero();
      fill(b);
    } else {
      fill(w);
    }
    p.expert_w.push_back(w);
    p.expert_b.push_back(b);
  }
  return p;
}

std::vector<std::vector<int>> multi_stereotype_prompting(const RecPrompt& prompt,
                                                         const StereotypeTemplateSet& templates) {
  std::vector<std::vector<int>> out;
  for (auto& t : templates.templates) {
    std::vector<int> v = t;
    v.insert(v.end(), prompt.tokens.begin(), prompt.tokens.end());
    out.push_back(std::move(v));
  }
  return out;
}

std::string mos_payload(const MoSParams<double>& p, const StereotypeTemplateSet& templates) {
  binio::Writer w;
  w.raw("SFMO1", 5);
  w.u32(static_cast<std::uint32_t>(p.N));
  w.u32(static_cast<std::uint32_t>(p.L));
  w.u32(static_cast<std::uint32_t>(p.K));
  w.u32(static_cast<std::uint32_t>(p.d));
  w.u32(p.static_experts ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(templates.templates.size()));
  for (auto& t : templates.templates) {
    w.u32(static_cast<std::uint32_t>(t.size()));
    for (int tok : t) w.u32(static_cast<std::uint32_t>(tok));
  }
  w.f32_array(p.router_w);
  w.f32_array(p.router_b);
  w.f32_array(p.reweight_w);
  w.f32_array(p.reweight_b);
  for (auto& m : p.expert_w) w.f32_array(m);
  for (auto& b : p.expert_b) w.f32_array(b);
  return w.bytes();
}

void save_mos(const MoSParams<double>& p, const StereotypeTemplateSet& templates,
              const std::string& path) {
  std::string payload = mos_payload(p, templates);
  write_file(path, payload + binio::raw_sha256(payload));
}

MoSParams<double> load_mos(const std::string& path, StereotypeTemplateSet* templates) {
  std::string bytes = read_file(path);
  std::string payload = binio::checked_payload(bytes, path);
  binio::Reader r(payload, path);
  char magic[5];
  r.raw(magic, 5);
  if (std::string(magic, 5) != "SFMO1") throw InputError(path + ": not a MoS file");
  MoSParams<double> p;
  p.N = static_cast<int>(r.u32());
  p.L = static_cast<int>(r.u32());
  p.K = static_cast<int>(r.u32());
  p.d = static_cast<int>(r.u32());
  p.static_experts = r.u32() != 0;
  if (p.N < 1 || p.L < 1 || p.d < 1 || p.K < 1 || p.K > p.N || p.N > 4096 || p.L > 4096 || p.d > 65536)
    throw InputError(path + ": bad dimensions");
  std::uint32_t G = r.u32();
  StereotypeTemplateSet t;
  for (std::uint32_t g = 0; g < G; ++g) {
    std::uint32_t n = r.u32();
    if (n > 4096) throw InputError(path + ": bad template length");
    std::vector<int> toks;
    for (std::uint32_t i = 0; i < n; ++i) toks.push_back(static_cast<int>(r.u32()));
    t.templates.push_back(toks);
  }
  p.router_w.resize(p.N, p.d);
  p.router_b.resize(p.N);
  p.reweight_w.resize(p.N, p.N);
  p.reweight_b.resize(p.N);
  std::size_t remaining = payload.size() - r.pos();
  if (remaining != 4 * p.size()) throw InputError(path + ": size does not match header");
  r.f32_array(p.router_w);
  r.f32_array(p.router_b);
  r.f32_array(p.reweight_w);
  r.f32_array(p.reweight_b);
  for (int n = 0; n < p.N; ++n) {
    MatrixXd m(p.L * p.d, p.d);
    r.f32_array(m);
    p.expert_w.push_back(m);
  }
  for (int n = 0; n < p.N; ++n) {
    VectorXd b(p.L * p.d);
    r.f32_array(b);
    p.expert_b.push_back(b);
  }
  if (templates) *templates = t;
  return p;
}

}  // namespace sfmos
