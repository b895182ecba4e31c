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

#include "sfmos/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace sfmos {

double auc_or_nan(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tied blocks.
  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        pos_rank_sum += rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double a = auc_or_nan(scores, labels);
  if (std::isnan(a)) throw InputError("AUC needs both classes");
  return a;
}

PrecisionRecall precision_recall(const std::vector<int>& decisions, const std::vector<int>& labels) {
  if (decisions.size() != labels.size()) throw InputError("decisions and labels differ in length");
  PrecisionRecall r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (decisions[i] && labels[i]) ++r.tp;
    else if (decisions[i]) ++r.fp;
    else if (labels[i]) ++r.fn;
    else ++r.tn;
  }
  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / (r.tp + r.fp);
    r.precision_defined = true;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / (r.tp + r.fn);
    r.recall_defined = true;
  }
  return r;
}

PreparedExamples prepare_examples(const InteractionDataset& ds, const Vocabulary& vocab,
                                  const FrozenScorer<double>& sc, const std::vector<Sequence>& seqs,
                                  EvalSetting setting, const MatrixXd& flags) {
  PreparedExamples ex;
  const int G = ds.n_groups();
  ex.H = MatrixXd::Zero(seqs.size(), G);
  ex.F = MatrixXd::Zero(seqs.size(), G);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    ex.prompts.push_back(tokenize_rec_prompt(s, ds, vocab, setting));
    ex.pooled.push_back(pool_prompt(sc, ex.prompts.back()));
    ex.labels.push_back(label_from_rating(s.target.rating, ds.rating_median) ? 1 : 0);
    ex.users.push_back(s.user);
    ex.items.push_back(s.target.item);
    std::vector<int> hist;
    for (auto& h : s.history) hist.push_back(h.item);
    auto prof = user_history_proportion(hist, flags);
    for (int g = 0; g < G; ++g) {
      ex.H(i, g) = prof.h[g];
      ex.F(i, g) = flags(s.target.item, g);
    }
  }
  return ex;
}

MatrixXd split_profiles(std::size_t n_users, const std::vector<Sequence>& seqs, const MatrixXd& flags) {
  std::vector<std::set<int>> items(n_users);
  for (auto& s : seqs)
    for (auto& h : s.history) items[s.user].insert(h.item);
  MatrixXd P = MatrixXd::Zero(n_users, flags.cols());
  for (std::size_t u = 0; u < n_users; ++u) {
    auto prof = user_history_proportion(std::vector<int>(items[u].begin(), items[u].end()), flags);
    for (Eigen::Index g = 0; g < flags.cols(); ++g) P(u, g) = prof.h[g];
  }
  return P;
}

std::vector<double> score_examples(const MoSParams<double>* params, const FrozenScorer<double>& sc,
                                   const StereotypeTemplateSet& templates, const PreparedExamples& ex,
                                   int threads) {
  std::vector<double> out(ex.size());
  if (params) {
    auto tc = cache_templates(sc, templates);
    parallel_for(ex.size(), threads,
                 [&](std::size_t i) { out[i] = mos_forward_pooled(*params, sc, ex.pooled[i], tc).y; });
  } else {
    MatrixXd none(0, sc.d);
    parallel_for(ex.size(), threads, [&](std::size_t i) {
      const auto& pp = ex.pooled[i];
      out[i] = logistic(scorer_logit(sc, context_with_prompt(pp, none), pp.tgt));
    });
  }
  for (double y : out)
    if (!std::isfinite(y)) throw NumericalError("non-finite score");
  return out;
}

SubsetMetrics subset_metrics(const std::vector<std::size_t>& rows, const std::vector<double>& scores,
                             const PreparedExamples& ex, const MatrixXd& profiles,
                             const MatrixXd& flags, double threshold) {
  SubsetMetrics m;
  m.n = static_cast<int>(rows.size());
  std::vector<double> s;
  std::vector<int> l, dec, users, items;
  for (auto r : rows) {
    s.push_back(scores[r]);
    l.push_back(ex.labels[r]);
    dec.push_back(scores[r] > threshold ? 1 : 0);
    users.push_back(ex.users[r]);
    items.push_back(ex.items[r]);
  }
  m.auc = auc_or_nan(s, l);
  m.pr = precision_recall(dec, l);
  m.fairness = stereotype_fairness(make_recommendations(users, items, s, threshold), profiles, flags);
  return m;
}

const SettingMetrics& MetricsReport::at(EvalSetting s) const {
  for (auto& m : settings)
    if (m.setting == s) return m;
  throw InputError("setting '" + setting_name(s) + "' was not evaluated");
}

namespace {

struct Scored {
  PreparedExamples ex;
  std::vector<double> scores;
  MatrixXd profiles;
};

Scored score_setting(const EvalInputs& in, const std::vector<Sequence>& test, EvalSetting setting) {
  if (test.empty()) throw InputError("empty test split");
  Scored s;
  s.ex = prepare_examples(*in.ds, *in.vocab, *in.scorer, test, setting, *in.flags);
  s.scores = score_examples(in.params, *in.scorer, *in.templates, s.ex, in.threads);
  s.profiles = split_profiles(in.ds->users.size(), test, *in.flags);
  return s;
}

PairedMetrics paired_from(const EvalInputs& in, const Scored& s) {
  PairedMetrics out;
  std::vector<std::size_t> cons, inc;
  for (std::size_t i = 0; i < s.ex.size(); ++i) {
    switch (pair_kind(in.ds->users[s.ex.users[i]].group, in.pairing ? *in.pairing : *in.flags, s.ex.items[i])) {
      case PairKind::kConsistent:
        cons.push_back(i);
        break;
      case PairKind::kInconsistent:
        inc.push_back(i);
        break;
      case PairKind::kNeutral:
        ++out.n_unpaired;
        break;
    }
  }
  out.consistent = subset_metrics(cons, s.scores, s.ex, s.profiles, *in.flags, in.decision_threshold);
  out.inconsistent = subset_metrics(inc, s.scores, s.ex, s.profiles, *in.flags, in.decision_threshold);
  return out;
}

}  // namespace

SettingMetrics evaluate_setting(const EvalInputs& in, const std::vector<Sequence>& test,
                                EvalSetting setting) {
  Scored s = score_setting(in, test, setting);
  SettingMetrics m;
  m.setting = setting;
  std::vector<std::size_t> all(s.ex.size());
  std::iota(all.begin(), all.end(), 0);
  m.all = subset_metrics(all, s.scores, s.ex, s.profiles, *in.flags, in.decision_threshold);
  auto paired = paired_from(in, s);
  m.consistent = paired.consistent;
  m.inconsistent = paired.inconsistent;
  m.n_unpaired = paired.n_unpaired;
  return m;
}

MetricsReport evaluate(const EvalInputs& in, const std::vector<Sequence>& test,
                       const std::vector<EvalSetting>& settings, EvalSetting primary) {
  if (settings.empty()) throw InputError("no evaluation settings");
  MetricsReport r;
  r.n_test = static_cast<int>(test.size());
  r.decision_threshold = in.decision_threshold;
  r.primary = std::find(settings.begin(), settings.end(), primary) != settings.end() ? primary : settings[0];
  for (auto s : settings) r.settings.push_back(evaluate_setting(in, test, s));
  return r;
}

PairedMetrics paired_group_eval(const EvalInputs& in, const std::vector<Sequence>& test,
                                EvalSetting setting) {
  return paired_from(in, score_setting(in, test, setting));
}

}  // namespace sfmos
