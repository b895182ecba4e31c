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

#include "sfmos/stereotype.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace sfmos {

namespace {

GroupCounts empty_counts(const InteractionDataset& ds) {
  GroupCounts c;
  c.n_groups = ds.n_groups();
  c.group_size = ds.group_sizes();
  c.item_group.assign(ds.items.size(), std::vector<int>(c.n_groups, 0));
  c.support.assign(ds.items.size(), 0);
  return c;
}

void add_user_items(GroupCounts& c, int group, const std::set<int>& items) {
  for (int v : items) {
    ++c.item_group[v][group];
    ++c.support[v];
  }
}

}  // namespace

GroupCounts count_dataset(const InteractionDataset& ds) {
  GroupCounts c = empty_counts(ds);
  std::vector<std::set<int>> per_user(ds.users.size());
  for (auto& x : ds.interactions) per_user[x.user].insert(x.item);
  for (std::size_t u = 0; u < ds.users.size(); ++u) add_user_items(c, ds.users[u].group, per_user[u]);
  return c;
}

GroupCounts count_sequences(const InteractionDataset& ds, const std::vector<Sequence>& seqs) {
  GroupCounts c = empty_counts(ds);
  std::vector<std::set<int>> per_user(ds.users.size());
  for (auto& s : seqs) {
    for (auto& h : s.history) per_user[s.user].insert(h.item);
    per_user[s.user].insert(s.target.item);
  }
  for (std::size_t u = 0; u < ds.users.size(); ++u) add_user_items(c, ds.users[u].group, per_user[u]);
  return c;
}

double group_interaction_fraction(const GroupCounts& counts, int item, int group) {
  if (group < 0 || group >= counts.n_groups) throw InputError("group index out of range");
  if (counts.group_size[group] == 0)
    throw InputError("group " + std::to_string(group) + " has no users");
  return static_cast<double>(counts.item_group[item][group]) / counts.group_size[group];
}

ItemStereotype item_bias_degree(const GroupCounts& counts, int item) {
  const int G = counts.n_groups;
  // Common denominator keeps the subtraction exact; one rounding at the end.
  long long common = 1;
  for (int g = 0; g < G; ++g) {
    if (counts.group_size[g] == 0)
      throw InputError("group " + std::to_string(g) + " has no users");
    common = std::lcm(common, static_cast<long long>(counts.group_size[g]));
  }
  std::vector<__int128> scaled(G);
  __int128 total = 0;
  for (int g = 0; g < G; ++g) {
    scaled[g] = static_cast<__int128>(counts.item_group[item][g]) * (common / counts.group_size[g]);
    total += scaled[g];
  }
  ItemStereotype s;
  s.item = item;
  s.bias.resize(G);
  std::vector<__int128> num(G);
  for (int g = 0; g < G; ++g) {
    num[g] = 2 * scaled[g] - total;
    s.bias[g] = static_cast<double>(num[g]) / static_cast<double>(common);
  }
  const __int128 best = *std::max_element(num.begin(), num.end());
  s.degree = static_cast<double>(best) / static_cast<double>(common);
  int at_max = 0, arg = -1;
  for (int g = 0; g < G; ++g)
    if (num[g] == best) {
      ++at_max;
      if (arg < 0) arg = g;
    }
  s.dominant_group = (at_max == 1 && best > 0) ? arg : -1;
  s.flagged.assign(G, 0);
  return s;
}

ThresholdSpec compute_threshold(const std::vector<double>& degrees, double z) {
  if (degrees.empty()) throw InputError("empty degree population for threshold");
  ThresholdSpec t;
  t.z = z;
  t.population_size = static_cast<int>(degrees.size());
  double sum = 0;
  for (double d : degrees) sum += d;
  t.mean = sum / degrees.size();
  double ss = 0;
  for (double d : degrees) ss += (d - t.mean) * (d - t.mean);
  t.std = std::sqrt(ss / degrees.size());
  t.threshold = t.mean + z * t.std;
  return t;
}

ItemStereotype apply_threshold(ItemStereotype item, const ThresholdSpec& spec) {
  item.flagged.assign(item.bias.size(), 0);
  if (item.dominant_group >= 0 && item.degree >= spec.threshold) item.flagged[item.dominant_group] = 1;
  return item;
}

UserStereotypeProfile user_history_proportion(const std::vector<int>& history,
                                              const MatrixXd& flags) {
  UserStereotypeProfile p;
  p.h.assign(flags.cols(), 0.0);
  p.history_len = static_cast<int>(history.size());
  if (history.empty()) {
    p.degenerate = true;
    return p;
  }
  for (int v : history)
    for (Eigen::Index g = 0; g < flags.cols(); ++g) p.h[g] += flags(v, g);
  for (auto& x : p.h) x /= history.size();
  return p;
}

int StereotypeArtifacts::flagged_count() const {
  return static_cast<int>(flags.sum());
}

StereotypeArtifacts compute_stereotypes(const GroupCounts& counts, double z, int min_interactions) {
  StereotypeArtifacts a;
  std::vector<double> population;
  for (int v = 0; v < counts.n_items(); ++v) {
    a.items.push_back(item_bias_degree(counts, v));
    if (counts.support[v] >= min_interactions) population.push_back(a.items.back().degree);
  }
  if (population.empty())
    throw InputError("no item has at least " + std::to_string(min_interactions) + " interactions");
  a.threshold = compute_threshold(population, z);
  a.threshold.min_interactions = min_interactions;
  a.flags = MatrixXd::Zero(counts.n_items(), counts.n_groups);
  for (auto& it : a.items) {
    it = apply_threshold(std::move(it), a.threshold);
    for (int g = 0; g < counts.n_groups; ++g) a.flags(it.item, g) = it.flagged[g];
  }
  return a;
}

}  // namespace sfmos
