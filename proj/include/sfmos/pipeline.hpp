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
#include "sfmos/dataset.hpp"
#include "sfmos/mos.hpp"
#include "sfmos/stereotype.hpp"
#include "sfmos/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sfmos {

// Keys accepted by the generator config file.
const std::vector<std::string>& generator_keys();
// Keys accepted by the training/evaluation config file.
const std::vector<std::string>& train_keys();

struct SyntheticSetup {
  SyntheticData data;
  FrozenScorer<double> scorer;
};

// Dataset plus planted, calibrated scorer from a generator config.
SyntheticSetup make_synthetic_setup(const KeyValueConfig& cfg, std::uint64_t seed);

struct Pipeline {
  Vocabulary vocab;
  DataSplit split;
  int skipped_users = 0;
  StereotypeArtifacts stereo;
  StereotypeTemplateSet templates;
  EvalSetting setting = EvalSetting::kExplicit;
  double decision_threshold = 0.5;
};

// Sequences, split, training-split stereotypes and templates.
Pipeline build_pipeline(const InteractionDataset& ds, const KeyValueConfig& cfg, std::uint64_t seed,
                        const FrozenScorer<double>& scorer);

TrainConfig train_config_from(const KeyValueConfig& cfg, std::uint64_t seed);

}  // namespace sfmos
