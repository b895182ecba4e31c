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

#include "sfmos/pipeline.hpp"

namespace sfmos {

const std::vector<std::string>& generator_keys() {
  static const std::vector<std::string> keys = {
      "seed", "n_users", "n_items", "group_ratio", "group_labels", "affinity", "rating_scale",
      "rating_median", "interactions_per_user", "neutral_fraction", "affinity_concentration",
      "popularity_spread", "preference_strength", "like_offset", "quality_scale", "noise_scale",
      "embedding_dim", "hidden", "beta", "attribute_scale", "probe_alpha", "probe_alpha_target",
      "probe_threshold", "probe_weight", "suppress_alpha", "suppress_alpha_target",
      "suppress_threshold", "suppress_weight", "readout_scale", "embed_scale", "calibration_sequences"};
  return keys;
}

const std::vector<std::string>& train_keys() {
  static const std::vector<std::string> keys = {
      "seed", "epochs", "batch_size", "learning_rate", "N", "L", "K", "lambda_fair",
      "lambda_expert", "optimizer", "diversity_on", "init_scale", "static_experts", "epsilon",
      "patience", "max_sequences", "z", "min_interactions", "setting", "decision_threshold"};
  return keys;
}

SyntheticSetup make_synthetic_setup(const KeyValueConfig& cfg, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.n_users = static_cast<int>(cfg.require_int("n_users"));
  sc.n_items = static_cast<int>(cfg.require_int("n_items"));
  sc.group_ratio = cfg.get_doubles("group_ratio");
  sc.affinity = cfg.require_double("affinity");
  auto scale = cfg.get_strings("rating_scale");
  if (scale.size() != 2) throw InputError("rating_scale must be 'min,max'");
  sc.rating_min = static_cast<int>(parse_int(scale[0], "rating_scale"));
  sc.rating_max = static_cast<int>(parse_int(scale[1], "rating_scale"));
  sc.rating_median = static_cast<int>(cfg.get_int("rating_median", (sc.rating_min + sc.rating_max) / 2));
  sc.interactions_per_user = static_cast<int>(cfg.require_int("interactions_per_user"));
  if (cfg.has("group_labels")) sc.group_labels = cfg.get_strings("group_labels");
  sc.neutral_fraction = cfg.get_double("neutral_fraction", sc.neutral_fraction);
  sc.affinity_concentration = cfg.get_double("affinity_concentration", sc.affinity_concentration);
  sc.popularity_spread = cfg.get_double("popularity_spread", sc.popularity_spread);
  sc.preference_strength = cfg.get_double("preference_strength", sc.preference_strength);
  sc.like_offset = cfg.get_double("like_offset", sc.like_offset);
  sc.quality_scale = cfg.get_double("quality_scale", sc.quality_scale);
  sc.noise_scale = cfg.get_double("noise_scale", sc.noise_scale);

  PlantedBias pb;
  pb.attribute_scale = cfg.get_double("attribute_scale", pb.attribute_scale);
  pb.alpha = cfg.get_double("probe_alpha", pb.alpha);
  pb.alpha_target = cfg.get_double("probe_alpha_target", pb.alpha_target);
  pb.theta = cfg.get_double("probe_threshold", pb.theta);
  pb.probe_weight = cfg.get_double("probe_weight", pb.probe_weight);
  pb.suppress_alpha = cfg.get_double("suppress_alpha", pb.suppress_alpha);
  pb.suppress_alpha_target = cfg.get_double("suppress_alpha_target", pb.suppress_alpha_target);
  pb.suppress_theta = cfg.get_double("suppress_threshold", pb.suppress_theta);
  pb.suppress_weight = cfg.get_double("suppress_weight", pb.suppress_weight);
  pb.readout_scale = cfg.get_double("readout_scale", pb.readout_scale);
  pb.embed_scale = cfg.get_double("embed_scale", pb.embed_scale);
  const int d = static_cast<int>(cfg.get_int("embedding_dim", 16));
  const int hidden = static_cast<int>(cfg.get_int("hidden", 32));
  const double beta = cfg.get_double("beta", 1.0);
  const auto n_calib = static_cast<std::size_t>(cfg.get_int("calibration_sequences", 1000));

  SyntheticSetup out{generate_synthetic(sc, seed), {}};
  const auto& ds = out.data.dataset;
  const auto vocab = Vocabulary::for_dataset(ds);
  out.scorer = make_frozen_scorer(vocab, d, hidden, seed, beta, pb, out.data.item_pool,
                                  out.data.item_strength);
  auto calib = build_sequences(ds, n_calib, seed);
  std::vector<RecPrompt> prompts;
  for (auto& s : calib.sequences)
    prompts.push_back(tokenize_rec_prompt(s, ds, vocab, EvalSetting::kImplicit));
  calibrate_offset(out.scorer, prompts);
  return out;
}

Pipeline build_pipeline(const InteractionDataset& ds, const KeyValueConfig& cfg, std::uint64_t seed,
                        const FrozenScorer<double>& scorer) {
  Pipeline p;
  if (ds.interactions.empty()) throw InputError("dataset has no interactions");
  p.vocab = Vocabulary::for_dataset(ds);
  if (p.vocab.size() > scorer.vocab_size)
    throw InputError("dataset vocabulary (" + std::to_string(p.vocab.size()) +
                     ") exceeds scorer vocabulary (" + std::to_string(scorer.vocab_size) + ")");
  const long long max_seq = cfg.get_int("max_sequences", 20000);
  if (max_seq < 10) throw InputError("max_sequences must be >= 10");
  auto seqs = build_sequences(ds, static_cast<std::size_t>(max_seq), seed);
  p.skipped_users = seqs.skipped_users;
  p.split = leave_one_out_split(seqs.sequences, seed);
  p.stereo = compute_stereotypes(count_sequences(ds, p.split.train), cfg.get_double("z", 2.0),
                                 static_cast<int>(cfg.get_int("min_interactions", 5)));
  p.templates = default_templates(p.vocab);
  p.setting = parse_setting(cfg.get_string("setting", "explicit"));
  p.decision_threshold = cfg.get_double("decision_threshold", 0.5);
  return p;
}

TrainConfig train_config_from(const KeyValueConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.N = static_cast<int>(cfg.get_int("N", t.N));
  t.L = static_cast<int>(cfg.get_int("L", t.L));
  t.K = static_cast<int>(cfg.get_int("K", t.K));
  t.lambda_fair = cfg.get_double("lambda_fair", t.lambda_fair);
  t.lambda_expert = cfg.get_double("lambda_expert", t.lambda_expert);
  auto opt = cfg.get_string("optimizer", "adam");
  if (opt == "adam")
    t.optimizer = OptimizerKind::kAdam;
  else if (opt == "sgd")
    t.optimizer = OptimizerKind::kSgd;
  else
    throw InputError("optimizer must be sgd or adam");
  auto div = cfg.get_string("diversity_on", "weights");
  if (div == "weights")
    t.diversity_on = DiversityTarget::kWeights;
  else if (div == "expert_outputs")
    t.diversity_on = DiversityTarget::kExpertOutputs;
  else
    throw InputError("diversity_on must be weights or expert_outputs");
  t.init_scale = cfg.get_double("init_scale", t.init_scale);
  t.static_experts = cfg.get_bool("static_experts", t.static_experts);
  t.epsilon = cfg.get_double("epsilon", t.epsilon);
  t.patience = static_cast<int>(cfg.get_int("patience", t.patience));
  t.validate();
  return t;
}

}  // namespace sfmos
