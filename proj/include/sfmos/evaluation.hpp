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
#include "sfmos/fairness.hpp"
#include "sfmos/mos.hpp"
#include "sfmos/stereotype.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sfmos {

// Mann-Whitney AUC, ties count one half. Throws InputError when a class is missing.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);
// Same, NaN instead of throwing.
double auc_or_nan(const std::vector<double>& scores, const std::vector<int>& labels);

struct PrecisionRecall {
  double precision = std::numeric_limits<double>::quiet_NaN();
  double recall = std::numeric_limits<double>::quiet_NaN();
  bool precision_defined = false;  // at least one positive decision
  bool recall_defined = false;     // at least one positive label
  int tp = 0, fp = 0, fn = 0, tn = 0;
};

PrecisionRecall precision_recall(const std::vector<int>& decisions, const std::vector<int>& labels);

// Prompts and fairness inputs for a list of sequences under one setting.
struct PreparedExamples {
  std::vector<RecPrompt> prompts;
  std::vector<PooledPrompt<double>> pooled;
  std::vector<int> labels;
  std::vector<int> users;
  std::vector<int> items;
  MatrixXd H;  // per sequence: history proportions of its own history (n x G)
  MatrixXd F;  // per sequence: flags of the target (n x G)

  std::size_t size() const { return prompts.size(); }
};

PreparedExamples prepare_examples(const InteractionDataset& ds, const Vocabulary& vocab,
                                  const FrozenScorer<double>& sc, const std::vector<Sequence>& seqs,
                                  EvalSetting setting, const MatrixXd& flags);

// Per user: proportions over the distinct history items of that user's sequences.
MatrixXd split_profiles(std::size_t n_users, const std::vector<Sequence>& seqs, const MatrixXd& flags);

// Scores with the MoS prompt, or with no soft prompt when params is null.
std::vector<double> score_examples(const MoSParams<double>* params, const FrozenScorer<double>& sc,
                                   const StereotypeTemplateSet& templates, const PreparedExamples& ex,
                                   int threads = 1);

struct SubsetMetrics {
  int n = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
  PrecisionRecall pr;
  FairnessReport fairness;
};

struct SettingMetrics {
  EvalSetting setting = EvalSetting::kImplicit;
  SubsetMetrics all;
  SubsetMetrics consistent;
  SubsetMetrics inconsistent;
  int n_unpaired = 0;
};

struct MetricsReport {
  int n_test = 0;
  double decision_threshold = 0.5;
  EvalSetting primary = EvalSetting::kExplicit;
  std::vector<SettingMetrics> settings;

  const SettingMetrics& at(EvalSetting s) const;
  double auc() const { return at(primary).all.auc; }
  double sf(EvalSetting s) const { return at(s).all.fairness.sf; }
};

SubsetMetrics subset_metrics(const std::vector<std::size_t>& rows, const std::vector<double>& scores,
                             const PreparedExamples& ex, const MatrixXd& profiles,
                             const MatrixXd& flags, double threshold);

struct EvalInputs {
  const InteractionDataset* ds = nullptr;
  const Vocabulary* vocab = nullptr;
  const FrozenScorer<double>* scorer = nullptr;
  const MoSParams<double>* params = nullptr;  // null: no soft prompt
  const StereotypeTemplateSet* templates = nullptr;
  const MatrixXd* flags = nullptr;
  // Item-to-group membership used to split consistent/inconsistent pairs; null uses flags.
  const MatrixXd* pairing = nullptr;
  double decision_threshold = 0.5;
  int threads = 1;
};

SettingMetrics evaluate_setting(const EvalInputs& in, const std::vector<Sequence>& test,
                                EvalSetting setting);

MetricsReport evaluate(const EvalInputs& in, const std::vector<Sequence>& test,
                       const std::vector<EvalSetting>& settings, EvalSetting primary);

struct PairedMetrics {
  SubsetMetrics consistent;
  SubsetMetrics inconsistent;
  int n_unpaired = 0;
};

// Consistent: target flagged for the user's group. Inconsistent: flagged for another group.
PairedMetrics paired_group_eval(const EvalInputs& in, const std::vector<Sequence>& test,
                                EvalSetting setting);

}  // namespace sfmos
