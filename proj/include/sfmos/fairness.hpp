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

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sfmos {

struct RecEntry {
  int user = 0;
  int item = 0;
  double score = 0;
  bool decision = false;
};

struct RecommendationSet {
  std::vector<RecEntry> entries;
  double decision_threshold = 0.5;
};

RecommendationSet make_recommendations(const std::vector<int>& users, const std::vector<int>& items,
                                       const std::vector<double>& scores, double threshold);

struct GroupTerm {
  double h_sum = 0;
  int flag_count = 0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool coverage_ok = false;
};

struct FairnessReport {
  double sf = std::numeric_limits<double>::quiet_NaN();
  std::vector<GroupTerm> per_group;
  std::vector<int> excluded_groups;
  int n_entries = 0;  // recommended pairs in S
  double decision_threshold = 0.5;
  bool degenerate = true;  // S empty or every group excluded
};

// profiles: n_users x G history proportions; flags: n_items x G.
// Only positively decided entries enter S.
FairnessReport stereotype_fairness(const RecommendationSet& recs, const MatrixXd& profiles,
                                   const MatrixXd& flags);

// Soft surrogate over probabilities p with rows H (h_u) and F (item flags).
// Groups whose flags are all zero in the batch are left out; returns 0 if none remain.
// If grad is non-null it receives d(SF)/dp.
template <typename S>
S soft_stereotype_fairness(const Vec<S>& p, const Mat<S>& H, const Mat<S>& F, S eps,
                           Vec<S>* grad = nullptr) {
  const Eigen::Index G = H.cols();
  if (grad) grad->setZero(p.size());
  S acc = 0;
  int used = 0;
  for (Eigen::Index g = 0; g < G; ++g) {
    if (F.col(g).sum() == S(0)) continue;
    const S num = p.dot(H.col(g));
    const S den = p.dot(F.col(g)) + eps;
    acc += num / den;
    ++used;
    if (grad) *grad += (H.col(g) / den - F.col(g) * (num / (den * den)));
  }
  if (used == 0) return S(0);
  if (grad) *grad *= S(-1) / S(used);
  return S(1) - acc / S(used);
}

enum class PairKind { kConsistent, kInconsistent, kNeutral };

// Consistent: the item is flagged for the user's group. Inconsistent: flagged for another group.
PairKind pair_kind(int user_group, const MatrixXd& flags, int item);

struct PairedFairness {
  FairnessReport consistent;
  FairnessReport inconsistent;
  int n_consistent = 0;
  int n_inconsistent = 0;
  int n_unpaired = 0;
};

PairedFairness fairness_by_pairing(const RecommendationSet& recs, const std::vector<int>& user_groups,
                                   const MatrixXd& flags, const MatrixXd& profiles);

}  // namespace sfmos
