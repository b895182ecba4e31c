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

#include "sfmos/backbone.hpp"

#include "binio.hpp"

#include <random>

namespace sfmos {

EvalSetting parse_setting(const std::string& name) {
  if (name == "implicit") return EvalSetting::kImplicit;
  if (name == "explicit") return EvalSetting::kExplicit;
  if (name == "counterfactual") return EvalSetting::kCounterfactual;
  throw InputError("unknown setting '" + name + "'");
}

std::string setting_name(EvalSetting s) {
  switch (s) {
    case EvalSetting::kImplicit:
      return "implicit";
    case EvalSetting::kExplicit:
      return "explicit";
    case EvalSetting::kCounterfactual:
      return "counterfactual";
  }
  return "?";
}

Vocabulary Vocabulary::for_dataset(const InteractionDataset& ds) {
  Vocabulary v;
  v.n_groups = ds.n_groups();
  v.n_title = ds.max_title_token() + 1;
  return v;
}

RecPrompt tokenize_rec_prompt(const Sequence& seq, const InteractionDataset& ds,
                              const Vocabulary& vocab, EvalSetting setting, int max_length) {
  auto title = [&](int item) -> const std::vector<int>& {
    if (item < 0 || item >= static_cast<int>(ds.items.size()))
      throw InputError("sequence references unknown item");
    return ds.items[item].title_tokens;
  };
  const int G = ds.n_groups();
  int prefix = -1;
  if (setting == EvalSetting::kExplicit) prefix = vocab.group_token(ds.users[seq.user].group);
  if (setting == EvalSetting::kCounterfactual) {
    if (G < 2) throw InputError("counterfactual setting needs at least 2 groups");
    prefix = vocab.group_token((ds.users[seq.user].group + 1) % G);
  }
  // Drop the oldest history items until the prompt fits.
  std::size_t first = 0;
  const std::size_t fixed = (prefix >= 0 ? 1 : 0) + 3 + title(seq.target.item).size();
  for (;; ++first) {
    std::size_t len = fixed;
    for (std::size_t i = first; i < seq.history.size(); ++i) len += title(seq.history[i].item).size();
    if (static_cast<int>(len) <= max_length) break;
    if (first == seq.history.size()) throw InputError("target title exceeds prompt length");
  }
  RecPrompt p;
  if (prefix >= 0) p.tokens.push_back(prefix);
  for (bool liked : {true, false}) {
    p.tokens.push_back(liked ? Vocabulary::kLike : Vocabulary::kDislike);
    for (std::size_t i = first; i < seq.history.size(); ++i) {
      if (label_from_rating(seq.history[i].rating, ds.rating_median) != liked) continue;
      for (int t : title(seq.history[i].item)) p.tokens.push_back(vocab.title_token(t));
    }
  }
  p.target_pos = static_cast<int>(p.tokens.size());
  p.tokens.push_back(Vocabulary::kTarget);
  for (int t : title(seq.target.item)) p.tokens.push_back(vocab.title_token(t));
  return p;
}

namespace {

template <typename M>
void round_to_float(M& m) {
  m = m.template cast<float>().template cast<double>();
}

}  // namespace

FrozenScorer<double> make_frozen_scorer(const Vocabulary& vocab, int d, int hidden,
                                        std::uint64_t seed, double beta, const PlantedBias& pb,
                                        const std::vector<int>& title_pool,
                                        const std::vector<double>& title_strength) {
  if (d < 1 || hidden < 1) throw InputError("scorer d and hidden must be >= 1");
  const int G = vocab.n_groups;
  if (G > d) throw InputError("scorer d must be at least the number of groups");
  if (G > hidden) throw InputError("scorer hidden must be at least the number of groups");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c, double scale) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng) * scale;
    return m;
  };

  FrozenScorer<double> sc;
  sc.vocab_size = vocab.size();
  sc.d = d;
  sc.hidden = hidden;
  sc.seed = seed;
  sc.beta = static_cast<float>(beta);
  sc.embed = gaussian(sc.vocab_size, d, pb.embed_scale / std::sqrt(double(d)));
  sc.embed.row(Vocabulary::kPad).setZero();

  // Orthonormal group directions.
  MatrixXd q = Eigen::HouseholderQR<MatrixXd>(gaussian(d, G, 1.0)).householderQ() *
               MatrixXd::Identity(d, G);
  MatrixXd U = q.transpose();  // G x d
  for (int g = 0; g < G; ++g) sc.embed.row(vocab.group_token(g)) = beta * pb.attribute_scale * U.row(g);
  for (std::size_t t = 0; t < title_pool.size() && static_cast<int>(t) < vocab.n_title; ++t) {
    if (title_pool[t] < 0) continue;
    double s = t < title_strength.size() ? title_strength[t] : 1.0;
    sc.embed.row(vocab.title_token(static_cast<int>(t))) += beta * s * U.row(title_pool[t]);
  }

  sc.W1 = gaussian(hidden, 2 * d, 1.0 / std::sqrt(2.0 * d));
  sc.b1 = gaussian(hidden, 1, 0.1);
  sc.w2 = gaussian(hidden, 1, pb.readout_scale / std::sqrt(double(hidden)));
  for (int g = 0; g < G; ++g) {
    sc.W1.row(g).head(d) = pb.alpha * U.row(g);
    sc.W1.row(g).tail(d) = pb.alpha_target * U.row(g);
    sc.b1(g) = -pb.theta;
    sc.w2(g) = pb.probe_weight;
  }
  if (pb.suppress_weight != 0.0) {
    if (2 * G > hidden) throw InputError("scorer hidden must be at least twice the number of groups");
    for (int g = 0; g < G; ++g) {
      sc.W1.row(G + g).head(d) = pb.suppress_alpha * U.row(g);
      sc.W1.row(G + g).tail(d) = -pb.suppress_alpha_target * U.row(g);
      sc.b1(G + g) = -pb.suppress_theta;
      sc.w2(G + g) = -pb.suppress_weight;
    }
  }
  sc.b2 = 0;
  round_to_float(sc.embed);
  round_to_float(sc.W1);
  round_to_float(sc.b1);
  round_to_float(sc.w2);
  return sc;
}

void calibrate_offset(FrozenScorer<double>& sc, const std::vector<RecPrompt>& prompts) {
  if (prompts.empty()) throw InputError("no prompts to calibrate the scorer offset");
  std::vector<double> raw;
  const double beta = sc.beta;
  sc.beta = 1.0;
  sc.b2 = 0;
  MatrixXd none(0, sc.d);
  for (auto& p : prompts) {
    auto pp = pool_prompt(sc, p);
    raw.push_back(scorer_logit(sc, context_with_prompt(pp, none), pp.tgt));
  }
  sc.beta = beta;
  std::sort(raw.begin(), raw.end());
  const std::size_t n = raw.size();
  double median = n % 2 ? raw[n / 2] : 0.5 * (raw[n / 2 - 1] + raw[n / 2]);
  sc.b2 = static_cast<float>(-median);
}

std::string scorer_payload(const FrozenScorer<double>& sc) {
  binio::Writer w;
  w.raw("SFSC1", 5);
  w.u32(static_cast<std::uint32_t>(sc.vocab_size));
  w.u32(static_cast<std::uint32_t>(sc.d));
  w.u32(static_cast<std::uint32_t>(sc.hidden));
  w.u64(sc.seed);
  w.f32(sc.beta);
  w.f32_array(sc.embed);
  w.f32_array(sc.W1);
  w.f32_array(sc.b1);
  w.f32_array(sc.w2);
  w.f32(sc.b2);
  return w.bytes();
}

std::string weights_digest(const FrozenScorer<double>& sc) { return sha256_hex(scorer_payload(sc)); }

void save_scorer(const FrozenScorer<double>& sc, const std::string& path) {
  std::string payload = scorer_payload(sc);
  write_file(path, payload + binio::raw_sha256(payload));
}

FrozenScorer<double> load_scorer(const std::string& path) {
  std::string bytes = read_file(path);
  std::string payload = binio::checked_payload(bytes, path);
  binio::Reader r(payload, path);
  char magic[5];
  r.raw(magic, 5);
  if (std::string(magic, 5) != "SFSC1") throw InputError(path + ": not a scorer file");
  FrozenScorer<double> sc;
  sc.vocab_size = static_cast<int>(r.u32());
  sc.d = static_cast<int>(r.u32());
  sc.hidden = static_cast<int>(r.u32());
  sc.seed = r.u64();
  sc.beta = r.f32();
  if (sc.vocab_size < 1 || sc.d < 1 || sc.hidden < 1) throw InputError(path + ": bad dimensions");
  std::size_t need = 4ull * (std::size_t(sc.vocab_size) * sc.d + std::size_t(sc.hidden) * 2 * sc.d +
                             2ull * sc.hidden + 1);
  if (payload.size() - r.pos() != need) throw InputError(path + ": size does not match header");
  sc.embed.resize(sc.vocab_size, sc.d);
  sc.W1.resize(sc.hidden, 2 * sc.d);
  sc.b1.resize(sc.hidden);
  sc.w2.resize(sc.hidden);
  r.f32_array(sc.embed);
  r.f32_array(sc.W1);
  r.f32_array(sc.b1);
  r.f32_array(sc.w2);
  sc.b2 = r.f32();
  return sc;
}

}  // namespace sfmos
