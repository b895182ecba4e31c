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

#include <vector>

namespace sfmos {

// Per item, how many distinct users of each group interacted with it.
struct GroupCounts {
  int n_groups = 0;
  std::vector<int> group_size;               // users per group
  std::vector<std::vector<int>> item_group;  // [item][group] -> users
  std::vector<int> support;                  // distinct users per item

  int n_items() const { return static_cast<int>(item_group.size()); }
};

// Counts every interaction of the dataset.
GroupCounts count_dataset(const InteractionDataset& ds);
// Counts history and target items of the given sequences; group sizes still span all users.
GroupCounts count_sequences(const InteractionDataset& ds, const std::vector<Sequence>& seqs);

struct ItemStereotype {
  int item = 0;
  std::vector<double> bias;
  double degree = 0;
  int dominant_group = -1;  // -1 when tied or degree <= 0
  std::vector<int> flagged;
};

struct ThresholdSpec {
  double z = 2.0;
  double mean = 0;
  double std = 0;
  double threshold = 0;
  int min_interactions = 5;
  int population_size = 0;
};

struct UserStereotypeProfile {
  std::vector<double> h;
  int history_len = 0;
  bool degenerate = false;  // empty history
};

double group_interaction_fraction(const GroupCounts& counts, int item, int group);

ItemStereotype item_bias_degree(const GroupCounts& counts, int item);

ThresholdSpec compute_threshold(const std::vector<double>& degrees, double z);

ItemStereotype apply_threshold(ItemStereotype item, const ThresholdSpec& spec);

// flags: n_items x n_groups matrix of 0/1.
UserStereotypeProfile user_history_proportion(const std::vector<int>& history,
                                              const MatrixXd& flags);

struct StereotypeArtifacts {
  std::vector<ItemStereotype> items;
  ThresholdSpec threshold;
  MatrixXd flags;  // n_items x n_groups

  int flagged_count() const;
};

// Degrees for every item, threshold over items with support >= min_interactions, flags.
StereotypeArtifacts compute_stereotypes(const GroupCounts& counts, double z, int min_interactions);

}  // namespace sfmos
