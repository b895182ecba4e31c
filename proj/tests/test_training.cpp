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

#include "sfmos/training.hpp"

#include "sfmos/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace sfmos {
namespace {

struct Small {
  SyntheticSetup setup;
  Pipeline p;
  PreparedExamples train, val;
  MatrixXd val_profiles;
};

const Small& small() {
  static const Small s = [] {
    auto gen = KeyValueConfig::parse_string(
        "n_users = 80\nn_items = 40\ngroup_ratio = 0.6,0.4\naffinity = 0.85\nrating_scale = 1,5\n"
        "interactions_per_user = 16\nembedding_dim = 8\nhidden = 12\ncalibration_sequences = 200\n");
    auto train = KeyValueConfig::parse_string("max_sequences = 300\nz = 0.5\nmin_interactions = 3\n");
    Small s;
    s.setup = make_synthetic_setup(gen, 3);
    s.p = build_pipeline(s.setup.data.dataset, train, 3, s.setup.scorer);
    const auto& ds = s.setup.data.dataset;
    s.train = prepare_examples(ds, s.p.vocab, s.setup.scorer, s.p.split.train, EvalSetting::kExplicit,
                               s.p.stereo.flags);
    s.val = prepare_examples(ds, s.p.vocab, s.setup.scorer, s.p.split.validation, EvalSetting::kExplicit,
                             s.p.stereo.flags);
    s.val_profiles = split_profiles(ds.users.size(), s.p.split.validation, s.p.stereo.flags);
    return s;
  }();
  return s;
}

TrainBatch first_rows(const PreparedExamples& ex, std::size_t n) {
  TrainBatch b{&ex, std::vector<std::size_t>(std::min(n, ex.size()))};
  std::iota(b.rows.begin(), b.rows.end(), 0);
  return b;
}

TrainConfig small_config() {
  TrainConfig c;
  c.N = 3;
  c.L = 2;
  c.K = 2;
  c.epochs = 2;
  c.batch_size = 32;
  c.seed = 5;
  return c;
}

TEST(RecLoss, AnalyticValues) {
  EXPECT_NEAR(rec_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(rec_loss(0.5, 0), 0.693147, 1e-6);
  EXPECT_NEAR(rec_loss(0.9, 0), 2.302585, 1e-6);
  EXPECT_LT(rec_loss(1 - 1e-15, 1), 1e-11);
  EXPECT_TRUE(std::isfinite(rec_loss(0.0, 1)));
  EXPECT_NEAR(rec_loss(0.0, 1), -std::log(kProbClamp), 1e-9);
}

TEST(FairLoss, HandCaseAndSignSymmetry) {
  MatrixXd F(2, 2), H(2, 2);
  F << 1, 0, 0, 1;
  H << 0.6, 0.2, 0.6, 0.2;
  VectorXd p = VectorXd::Ones(2);
  EXPECT_NEAR(fair_loss(p, H, F, 1e-8), 0.2, 1e-7);
  // Profiles giving SF = -0.2 produce the same loss.
  H << 0.8, 0.4, 0.8, 0.4;
  EXPECT_NEAR(fair_loss(p, H, F, 1e-8), 0.2, 1e-7);
  H << 0.5, 0.5, 0.5, 0.5;
  EXPECT_NEAR(fair_loss(p, H, F, 1e-8), 0.0, 1e-7);
}

TEST(Diversity, EnumeratedPairs) {
  EXPECT_EQ(expert_diversity_loss(Eigen::Vector4d(0.25, 0.25, 0.25, 0.25)), 0.0);
  EXPECT_EQ(expert_diversity_loss(Eigen::Vector4d(1, 0, 0, 0)), 0.0);
  EXPECT_NEAR(expert_diversity_loss(Eigen::Vector4d(0.7, 0.2, 0.1, 0.0)), -0.01, 1e-15);
  EXPECT_THROW(expert_diversity_loss(VectorXd::Ones(1)), InputError);
}

TEST(Diversity, SubgradientFollowsClosestPair) {
  VectorXd g;
  const double l = expert_diversity_loss(Eigen::Vector4d(0.6, 0.25, 0.1, 0.05), &g);
  EXPECT_NEAR(l, -0.0025, 1e-15);
  EXPECT_NEAR(g(2), -0.1, 1e-15);
  EXPECT_NEAR(g(3), 0.1, 1e-15);
  EXPECT_EQ(g(0), 0.0);
  EXPECT_EQ(g(1), 0.0);
  // Exact tie: the first pair in (i, j) order carries it.
  expert_diversity_loss(Eigen::Vector3d(0.5, 0.5, 0.5), &g);
  EXPECT_EQ(g, Eigen::Vector3d(0, 0, 0));
  expert_diversity_loss(Eigen::Vector4d(0.0, 0.25, 0.5, 0.75), &g);
  EXPECT_NEAR(g(0), 0.5, 1e-15);
  EXPECT_NEAR(g(1), -0.5, 1e-15);
}

TEST(TotalLoss, Additivity) {
  auto b = total_loss(1.0, 0.2, -0.01, 1, 1);
  EXPECT_NEAR(b.l_total, 1.19, 1e-15);
  auto z = total_loss(0, 0, 0, 1, 1);
  EXPECT_EQ(z.l_total, 0.0);
  auto r = total_loss(0.7, 0.3, -0.2, 0, 0.5);
  EXPECT_NEAR(r.l_total, 0.6, 1e-15);
  EXPECT_EQ(r.lambda_fair, 0.0);
}

TEST(BatchLoss, StoredTotalEqualsParts) {
  const auto& s = small();
  auto cfg = small_config();
  auto params = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 1, 0.3);
  auto tc = cache_templates(s.setup.scorer, s.p.templates);
  auto b = batch_loss(params, s.setup.scorer, tc, first_rows(s.train, 40), cfg);
  EXPECT_NEAR(b.l_total, b.l_rec + cfg.lambda_fair * b.l_fair + cfg.lambda_expert * b.l_expert, 1e-12);
  EXPECT_GE(b.l_rec, 0.0);
}

TEST(BatchLoss, FlatBackboneGivesZeroGradient) {
  const auto& s = small();
  auto sc = s.setup.scorer;
  sc.w2.setZero();
  sc.b2 = 0;
  auto cfg = small_config();
  cfg.lambda_expert = 0;  // the diversity term does not pass through the backbone
  auto params = init_mos(cfg.N, cfg.L, cfg.K, sc.d, 1, 0.3);
  auto grad = zero_like(params);
  batch_loss(params, sc, cache_templates(sc, s.p.templates), first_rows(s.train, 30), cfg, &grad);
  EXPECT_EQ(grad.flatten().cwiseAbs().maxCoeff(), 0.0);
}

// Gradient with both lambdas at zero against a finite difference of the mean BCE
// built directly from mos_forward.
TEST(BatchLoss, RecOnlyGradientMatchesIndependentBce) {
  const auto& s = small();
  auto cfg = small_config();
  cfg.lambda_fair = cfg.lambda_expert = 0;
  auto params = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 2, 0.5);
  const auto tc = cache_templates(s.setup.scorer, s.p.templates);
  const auto batch = first_rows(s.train, 10);
  auto grad = zero_like(params);
  batch_loss(params, s.setup.scorer, tc, batch, cfg, &grad);
  auto bce = [&](const MoSParams<double>& q) {
    double sum = 0;
    for (auto r : batch.rows)
      sum += rec_loss(mos_forward(q, s.setup.scorer, s.train.prompts[r], s.p.templates).y, s.train.labels[r]);
    return sum / batch.rows.size();
  };
  VectorXd theta = params.flatten();
  const VectorXd a = grad.flatten();
  auto probe = params;
  double worst = 0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + 1e-5;
    probe.unflatten(theta);
    const double up = bce(probe);
    theta(i) = keep - 1e-5;
    probe.unflatten(theta);
    const double down = bce(probe);
    theta(i) = keep;
    const double num = (up - down) / 2e-5;
    worst = std::max(worst, std::abs(a(i) - num) / std::max({std::abs(a(i)), std::abs(num), 1e-6}));
  }
  EXPECT_LT(worst, 1e-4);
}

// Central differences on the full objective, reported per parameter block.
TEST(BatchLoss, FullGradientMatchesFiniteDifferencesPerBlock) {
  const auto& s = small();
  auto cfg = small_config();
  auto params = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 4, 0.5);
  params.router_b << 0.3, -0.2, 0.1;
  const auto tc = cache_templates(s.setup.scorer, s.p.templates);
  TrainBatch batch{&s.train, {}};
  for (std::size_t r = 0; r < 16; ++r) batch.rows.push_back((r * 7) % s.train.size());
  auto grad = zero_like(params);
  batch_loss(params, s.setup.scorer, tc, batch, cfg, &grad);
  VectorXd theta = params.flatten();
  const VectorXd a = grad.flatten();
  VectorXd num(theta.size());
  auto probe = params;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + 1e-5;
    probe.unflatten(theta);
    const double up = batch_loss(probe, s.setup.scorer, tc, batch, cfg).l_total;
    theta(i) = keep - 1e-5;
    probe.unflatten(theta);
    const double down = batch_loss(probe, s.setup.scorer, tc, batch, cfg).l_total;
    theta(i) = keep;
    num(i) = (up - down) / 2e-5;
  }
  // Blocks in flatten order: router, reweight, experts.
  const Eigen::Index router = cfg.N * params.d + cfg.N, rew = cfg.N * cfg.N + cfg.N;
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks{
      {0, router}, {router, rew}, {router + rew, theta.size() - router - rew}};
  for (auto [start, len] : blocks) {
    double worst = 0;
    for (Eigen::Index i = start; i < start + len; ++i)
      worst = std::max(worst, std::abs(a(i) - num(i)) / std::max({std::abs(a(i)), std::abs(num(i)), 1e-6}));
    EXPECT_LT(worst, 1e-4) << "block at " << start;
  }
}

TEST(Optimizer, SmallStepsDecreaseRecLoss) {
  const auto& s = small();
  auto cfg = small_config();
  cfg.lambda_fair = cfg.lambda_expert = 0;
  auto params = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 6, 0.1);
  const auto tc = cache_templates(s.setup.scorer, s.p.templates);
  const auto batch = first_rows(s.train, 64);
  Optimizer opt(OptimizerKind::kAdam, 1e-3, params.size());
  auto grad = zero_like(params);
  double prev = batch_loss(params, s.setup.scorer, tc, batch, cfg, &grad).l_total;
  for (int step = 0; step < 10; ++step) {
    opt.step(params, grad);
    const double cur = batch_loss(params, s.setup.scorer, tc, batch, cfg, &grad).l_total;
    EXPECT_LT(cur, prev) << "step " << step;
    prev = cur;
  }
  EXPECT_EQ(opt.steps(), 10);
}

TEST(Optimizer, SgdIsPlainGradientStep) {
  auto p = init_mos(2, 1, 1, 2, 1, 0.5);
  auto g = zero_like(p);
  VectorXd gv = VectorXd::LinSpaced(p.size(), -1, 1);
  g.unflatten(gv);
  const VectorXd before = p.flatten();
  Optimizer opt(OptimizerKind::kSgd, 0.1, p.size());
  opt.step(p, g);
  EXPECT_TRUE(p.flatten().isApprox(before - 0.1 * gv, 1e-15));
}

FitData fit_data(const Small& s) {
  FitData d;
  d.train = &s.train;
  d.validation = &s.val;
  d.val_profiles = &s.val_profiles;
  d.flags = &s.p.stereo.flags;
  return d;
}

TEST(Fit, ZeroEpochsReturnsInitBitwise) {
  const auto& s = small();
  auto cfg = small_config();
  cfg.epochs = 0;
  auto init = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 8, 0.1);
  auto res = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init);
  EXPECT_EQ(res.params.flatten(), init.flatten());
  EXPECT_TRUE(res.log.empty());
}

TEST(Fit, DeterministicAndScorerUntouched) {
  const auto& s = small();
  auto cfg = small_config();
  const auto digest = weights_digest(s.setup.scorer);
  auto init = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 8, 0.1);
  auto a = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init);
  auto b = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  ASSERT_EQ(a.log.size(), 2u);
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    EXPECT_EQ(a.log[e].train.l_total, b.log[e].train.l_total);
    EXPECT_EQ(a.log[e].val_auc, b.log[e].val_auc);
  }
  EXPECT_EQ(weights_digest(s.setup.scorer), digest);
  EXPECT_NE(a.params.flatten(), init.flatten());
}

TEST(Fit, ThreadCountDoesNotChangeResult) {
  const auto& s = small();
  auto cfg = small_config();
  cfg.epochs = 1;
  auto init = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 8, 0.1);
  auto a = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init, 1);
  auto b = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init, 3);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
}

TEST(Fit, NonFiniteLossRaisesWithBatchIndex) {
  const auto& s = small();
  auto cfg = small_config();
  auto init = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 8, 0.1);
  init.router_w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos) << e.what();
  }
}

TEST(Fit, PatienceStopsEarly) {
  const auto& s = small();
  auto cfg = small_config();
  cfg.epochs = 40;
  cfg.patience = 1;
  cfg.learning_rate = 0.5;  // large steps overshoot, so validation loss stalls quickly
  auto init = init_mos(cfg.N, cfg.L, cfg.K, s.setup.scorer.d, 8, 0.1);
  auto res = fit(cfg, fit_data(s), s.setup.scorer, s.p.templates, init);
  EXPECT_TRUE(res.stopped_early);
  EXPECT_LT(res.log.size(), 40u);
}

TEST(TrainConfig, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), InputError);
  };
  bad([](TrainConfig& c) { c.epochs = -1; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.learning_rate = 0; });
  bad([](TrainConfig& c) { c.K = 5; });
  bad([](TrainConfig& c) { c.lambda_fair = -1; });
  bad([](TrainConfig& c) { c.N = 1, c.K = 1; });  // diversity term needs two experts
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
}

}  // namespace
}  // namespace sfmos
