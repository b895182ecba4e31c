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

#include <cstdint>
#include <string>
#include <vector>

namespace sfmos {

struct UserRecord {
  std::string user_id;
  int group = 0;  // index into group_set
  std::vector<int> attribute_tokens;
};

struct ItemRecord {
  std::string item_id;
  std::vector<int> title_tokens;
};

struct Interaction {
  int user = 0;  // index into users
  int item = 0;  // index into items
  int rating = 0;
  long long timestamp = 0;
};

struct InteractionDataset {
  std::vector<UserRecord> users;
  std::vector<ItemRecord> items;
  std::vector<Interaction> interactions;
  std::vector<std::string> group_set;
  int rating_min = 1;
  int rating_max = 5;
  int rating_median = 3;

  // Per user: interaction indices sorted by (timestamp, item_id).
  std::vector<std::vector<int>> histories;

  int n_groups() const { return static_cast<int>(group_set.size()); }
  std::vector<int> group_sizes() const;
  // Fills `histories`; call after editing interactions.
  void index();
  int max_title_token() const;
};

struct RatedItem {
  int item = 0;
  int rating = 0;
};

struct Sequence {
  int user = 0;
  std::vector<RatedItem> history;  // 10, chronological
  RatedItem target;
};

struct SequenceSet {
  std::vector<Sequence> sequences;
  int skipped_users = 0;
};

struct DataSplit {
  std::vector<Sequence> train;
  std::vector<Sequence> validation;
  std::vector<Sequence> test;
};

constexpr int kHistoryLength = 10;
constexpr int kWindowLength = kHistoryLength + 1;

// Compares item ids numerically when both are integers, else lexically.
bool item_id_less(const std::string& a, const std::string& b);

InteractionDataset load_dataset(const std::string& users_path, const std::string& items_path,
                                const std::string& interactions_path,
                                const std::vector<std::string>& group_set, int rating_min,
                                int rating_max, int rating_median);

void write_dataset_csv(const InteractionDataset& ds, const std::string& dir);

SequenceSet build_sequences(const InteractionDataset& ds, std::size_t max_sequences,
                            std::uint64_t seed);

DataSplit leave_one_out_split(const std::vector<Sequence>& sequences, std::uint64_t seed);

inline bool label_from_rating(int rating, int rating_median) { return rating >= rating_median; }

struct SyntheticConfig {
  int n_users = 1000;
  int n_items = 200;
  std::vector<double> group_ratio{0.7, 0.3};
  std::vector<std::string> group_labels;  // defaults to g0, g1, ...
  double affinity = 0.85;
  int rating_min = 1;
  int rating_max = 5;
  int rating_median = 3;
  int interactions_per_user = 30;
  double neutral_fraction = 0.2;
  double affinity_concentration = 6.0;
  double popularity_spread = 1.0;
  double preference_strength = 2.0;
  double like_offset = 2.0;
  double quality_scale = 1.0;
  double noise_scale = 1.0;

  void validate() const;
};

struct SyntheticData {
  InteractionDataset dataset;
  std::vector<int> item_pool;         // group index, -1 for neutral
  std::vector<double> item_strength;  // popularity weight over its mean
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace sfmos
