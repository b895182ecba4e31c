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
#include "sfmos/evaluation.hpp"
#include "sfmos/mos.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sfmos {

enum class OptimizerKind { kSgd, kAdam };
enum class DiversityTarget { kWeights, kExpertOutputs };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  int N = 4;
  int L = 5;
  int K = 1;
  double lambda_fair = 1.0;
  double lambda_expert = 1.0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  DiversityTarget diversity_on = DiversityTarget::kWeights;
  double init_scale = 0.1;
  bool static_experts = false;
  double epsilon = 1e-8;
  int patience = 0;  // 0 disables early stopping

  void validate() const;
};

struct LossBreakdown {
  double l_rec = 0;
  double l_fair = 0;
  double l_expert = 0;
  double l_total = 0;
  double lambda_fair = 1;
  double lambda_expert = 1;
};

constexpr double kProbClamp = 1e-12;

double rec_loss(double like_prob, int label);

// |soft SF| over the batch.
double fair_loss(const VectorXd& p, const MatrixXd& H, const MatrixXd& F, double eps);

// -min over pairs i<j of (w_i - w_j)^2. The first minimizing pair in (i, j) order
// carries the subgradient; grad (optional) receives d loss / d w.
double expert_diversity_loss(const VectorXd& w, VectorXd* grad = nullptr);

LossBreakdown total_loss(double l_rec, double l_fair, double l_expert, double lambda_fair,
                         double lambda_expert);

struct TrainBatch {
  const PreparedExamples* ex = nullptr;
  std::vector<std::size_t> rows;
};

// Forward + loss; when grad is non-null it receives dL_total/dtheta (same shapes as params).
LossBreakdown batch_loss(const MoSParams<double>& params, const FrozenScorer<double>& sc,
                         const TemplateCache<double>& tc, const TrainBatch& batch,
                         const TrainConfig& cfg, MoSParams<double>* grad = nullptr, int threads = 1);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::size_t n_params);
  void step(MoSParams<double>& params, const MoSParams<double>& grad);
  long long steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long long t_ = 0;
  VectorXd m_, v_;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;  // batch means
  double val_l_total = 0;
  double val_auc = 0;
  double val_sf = 0;
};

struct FitResult {
  MoSParams<double> params;
  std::vector<EpochLog> log;
  bool stopped_early = false;
};

struct FitData {
  const PreparedExamples* train = nullptr;
  const PreparedExamples* validation = nullptr;  // may be null
  const MatrixXd* val_profiles = nullptr;
  const MatrixXd* flags = nullptr;
  double decision_threshold = 0.5;
};

FitResult fit(const TrainConfig& cfg, const FitData& data, const FrozenScorer<double>& sc,
              const StereotypeTemplateSet& templates, MoSParams<double> init, int threads = 1,
              const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace sfmos
