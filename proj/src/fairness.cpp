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

#include "sfmos/fairness.hpp"

namespace sfmos {

RecommendationSet make_recommendations(const std::vector<int>& users, const std::vector<int>& items,
                                       const std::vector<double>& scores, double threshold) {
  if (users.size() != items.size() || users.size() != scores.size())
    throw InputError("recommendation arrays differ in length");
  RecommendationSet r;
  r.decision_threshold = threshold;
  for (std::size_t i = 0; i < users.size(); ++i)
    r.entries.push_back({users[i], items[i], scores[i], scores[i] > threshold});
  return r;
}

FairnessReport stereotype_fairness(const RecommendationSet& recs, const MatrixXd& profiles,
                                   const MatrixXd& flags) {
  const Eigen::Index G = flags.cols();
  FairnessReport rep;
  rep.decision_threshold = recs.decision_threshold;
  rep.per_group.assign(G, {});
  for (const auto& e : recs.entries) {
    if (!e.decision) continue;
    ++rep.n_entries;
    for (Eigen::Index g = 0; g < G; ++g) {
      rep.per_group[g].h_sum += profiles(e.user, g);
      rep.per_group[g].flag_count += static_cast<int>(flags(e.item, g));
    }
  }
  double acc = 0;
  int used = 0;
  for (Eigen::Index g = 0; g < G; ++g) {
    auto& t = rep.per_group[g];
    if (t.flag_count > 0) {
      t.ratio = t.h_sum / t.flag_count;
      t.coverage_ok = true;
      acc += t.ratio;
      ++used;
    } else {
      rep.excluded_groups.push_back(static_cast<int>(g));
    }
  }
  if (used > 0) {
    rep.sf = 1.0 - acc / used;
    rep.degenerate = false;
  }
  return rep;
}

PairKind pair_kind(int user_group, const MatrixXd& flags, int item) {
  if (flags(item, user_group) > 0) return PairKind::kConsistent;
  if (flags.row(item).sum() > 0) return PairKind::kInconsistent;
  return PairKind::kNeutral;
}

PairedFairness fairness_by_pairing(const RecommendationSet& recs, const std::vector<int>& user_groups,
                                   const MatrixXd& flags, const MatrixXd& profiles) {
  RecommendationSet cons, inc;
  cons.decision_threshold = inc.decision_threshold = recs.decision_threshold;
  PairedFairness out;
  for (const auto& e : recs.entries) {
    switch (pair_kind(user_groups[e.user], flags, e.item)) {
      case PairKind::kConsistent:
        cons.entries.push_back(e);
        break;
      case PairKind::kInconsistent:
        inc.entries.push_back(e);
        break;
      case PairKind::kNeutral:
        ++out.n_unpaired;
        break;
    }
  }
  out.n_consistent = static_cast<int>(cons.entries.size());
  out.n_inconsistent = static_cast<int>(inc.entries.size());
  out.consistent = stereotype_fairness(cons, profiles, flags);
  out.inconsistent = stereotype_fairness(inc, profiles, flags);
  return out;
}

}  // namespace sfmos
