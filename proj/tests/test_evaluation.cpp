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

#include "sfmos/evaluation.hpp"

#include "sfmos/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace sfmos {
namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      pairs += 1;
    }
  return wins / pairs;
}

TEST(Auc, SmallCases) {
  EXPECT_EQ(auc({0.9, 0.1}, {1, 0}), 1.0);
  EXPECT_EQ(auc({0.1, 0.9}, {1, 0}), 0.0);
  EXPECT_EQ(auc({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}), 0.5);
}

TEST(Auc, MatchesPairwiseCountWithTies) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 50; ++i) {
      s.push_back(static_cast<double>(rng() % 8) / 8);  // coarse grid forces ties
      y.push_back(static_cast<int>(rng() % 2));
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<double> s, t;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    s.push_back(u(rng));
    t.push_back(std::exp(3 * s.back()) + 1);
    y.push_back(i % 3 == 0);
  }
  EXPECT_EQ(auc(s, y), auc(t, y));
}

TEST(Auc, SingleClass) {
  EXPECT_THROW(auc({0.2, 0.3}, {1, 1}), InputError);
  EXPECT_TRUE(std::isnan(auc_or_nan({0.2, 0.3}, {0, 0})));
  EXPECT_THROW(auc({0.2}, {1, 0}), InputError);
}

TEST(PrecisionRecall, ConfusionCounts) {
  auto perfect = precision_recall({1, 0, 1}, {1, 0, 1});
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  auto everything = precision_recall({1, 1, 1, 1}, {1, 0, 0, 0});
  EXPECT_EQ(everything.precision, 0.25);
  EXPECT_EQ(everything.recall, 1.0);
  // TP=3, FP=1, FN=2, TN=1.
  auto r = precision_recall({1, 1, 1, 1, 0, 0, 0}, {1, 1, 1, 0, 1, 1, 0});
  EXPECT_EQ(r.tp, 3);
  EXPECT_EQ(r.fp, 1);
  EXPECT_EQ(r.fn, 2);
  EXPECT_EQ(r.tn, 1);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 0.6);
}

TEST(PrecisionRecall, DegenerateDenominatorsAreFlagged) {
  auto none = precision_recall({0, 0}, {1, 0});
  EXPECT_FALSE(none.precision_defined);
  EXPECT_TRUE(std::isnan(none.precision));
  EXPECT_TRUE(none.recall_defined);
  EXPECT_EQ(none.recall, 0.0);
  auto no_pos = precision_recall({1, 0}, {0, 0});
  EXPECT_FALSE(no_pos.recall_defined);
}

struct Setup {
  SyntheticSetup syn;
  Pipeline p;
};

const Setup& setup() {
  static const Setup s = [] {
    auto gen = KeyValueConfig::parse_string(
        "n_users = 150\nn_items = 60\ngroup_ratio = 0.7,0.3\naffinity = 0.85\nrating_scale = 1,5\n"
        "interactions_per_user = 20\nembedding_dim = 8\nhidden = 16\ncalibration_sequences = 300\n");
    auto train = KeyValueConfig::parse_string("max_sequences = 800\nz = 0.5\nmin_interactions = 3\n");
    Setup s;
    s.syn = make_synthetic_setup(gen, 7);
    s.p = build_pipeline(s.syn.data.dataset, train, 7, s.syn.scorer);
    return s;
  }();
  return s;
}

EvalInputs inputs(const Setup& s, const FrozenScorer<double>& sc) {
  EvalInputs in;
  in.ds = &s.syn.data.dataset;
  in.vocab = &s.p.vocab;
  in.scorer = &sc;
  in.templates = &s.p.templates;
  in.flags = &s.p.stereo.flags;
  return in;
}

const std::vector<EvalSetting> kAll{EvalSetting::kImplicit, EvalSetting::kExplicit,
                                    EvalSetting::kCounterfactual};

TEST(Evaluate, FlatBackboneHasNoRecommendations) {
  const auto& s = setup();
  auto sc = s.syn.scorer;
  sc.beta = 0;
  auto r = evaluate(inputs(s, sc), s.p.split.test, kAll, EvalSetting::kExplicit);
  ASSERT_EQ(r.settings.size(), 3u);
  for (auto& m : r.settings) {
    EXPECT_EQ(m.all.auc, 0.5);
    EXPECT_TRUE(m.all.fairness.degenerate);
    EXPECT_EQ(m.all.fairness.n_entries, 0);
    EXPECT_FALSE(m.all.pr.precision_defined);
  }
}

// With every score at 0.5 and a lower threshold, all pairs are recommended whatever the prompt says.
TEST(Evaluate, SettingsAgreeWhenBackboneIgnoresTokens) {
  const auto& s = setup();
  auto sc = s.syn.scorer;
  sc.beta = 0;
  auto in = inputs(s, sc);
  in.decision_threshold = 0.4;
  auto r = evaluate(in, s.p.split.test, kAll, EvalSetting::kExplicit);
  ASSERT_FALSE(r.at(EvalSetting::kImplicit).all.fairness.degenerate);
  EXPECT_EQ(r.sf(EvalSetting::kImplicit), r.sf(EvalSetting::kExplicit));
  EXPECT_EQ(r.sf(EvalSetting::kExplicit), r.sf(EvalSetting::kCounterfactual));
}

TEST(Evaluate, SfEqualsStandaloneMetric) {
  const auto& s = setup();
  const auto& sc = s.syn.scorer;
  auto in = inputs(s, sc);
  auto r = evaluate(in, s.p.split.test, {EvalSetting::kExplicit}, EvalSetting::kExplicit);
  auto ex = prepare_examples(s.syn.data.dataset, s.p.vocab, sc, s.p.split.test, EvalSetting::kExplicit,
                             s.p.stereo.flags);
  auto scores = score_examples(nullptr, sc, s.p.templates, ex);
  auto prof = split_profiles(s.syn.data.dataset.users.size(), s.p.split.test, s.p.stereo.flags);
  auto standalone = stereotype_fairness(make_recommendations(ex.users, ex.items, scores, 0.5), prof,
                                        s.p.stereo.flags);
  EXPECT_EQ(r.sf(EvalSetting::kExplicit), standalone.sf);
  EXPECT_EQ(r.auc(), auc(scores, ex.labels));
  EXPECT_EQ(r.n_test, static_cast<int>(s.p.split.test.size()));
}

TEST(Evaluate, PartitionMatchesManualAssignment) {
  const auto& s = setup();
  const auto& ds = s.syn.data.dataset;
  const auto& F = s.p.stereo.flags;
  int cons = 0, inc = 0, neutral = 0;
  for (auto& q : s.p.split.test) {
    const int g = ds.users[q.user].group;
    if (F(q.target.item, g) == 1) {
      ++cons;
    } else {
      bool other = false;
      for (int h = 0; h < ds.n_groups(); ++h) other = other || (h != g && F(q.target.item, h) == 1);
      (other ? inc : neutral) += 1;
    }
  }
  auto m = evaluate_setting(inputs(s, s.syn.scorer), s.p.split.test, EvalSetting::kExplicit);
  EXPECT_EQ(m.consistent.n, cons);
  EXPECT_EQ(m.inconsistent.n, inc);
  EXPECT_EQ(m.n_unpaired, neutral);
  EXPECT_GT(cons, 0);
  EXPECT_GT(inc, 0);
}

TEST(Evaluate, NeutralOnlyLeavesBothPartitionsEmpty) {
  const auto& s = setup();
  MatrixXd none = MatrixXd::Zero(s.p.stereo.flags.rows(), s.p.stereo.flags.cols());
  auto in = inputs(s, s.syn.scorer);
  in.flags = &none;
  auto m = paired_group_eval(in, s.p.split.test, EvalSetting::kExplicit);
  EXPECT_EQ(m.consistent.n, 0);
  EXPECT_EQ(m.inconsistent.n, 0);
  EXPECT_TRUE(m.consistent.fairness.degenerate);
  EXPECT_TRUE(m.inconsistent.fairness.degenerate);
  EXPECT_EQ(m.n_unpaired, static_cast<int>(s.p.split.test.size()));
}

TEST(Evaluate, DeterministicAndReadOnly) {
  const auto& s = setup();
  auto params = init_mos(4, 5, 1, s.syn.scorer.d, 3, 0.1);
  const auto before = params.flatten();
  const auto digest = weights_digest(s.syn.scorer);
  auto in = inputs(s, s.syn.scorer);
  in.params = &params;
  auto a = evaluate(in, s.p.split.test, kAll, EvalSetting::kExplicit);
  in.threads = 2;
  auto b = evaluate(in, s.p.split.test, kAll, EvalSetting::kExplicit);
  for (std::size_t i = 0; i < a.settings.size(); ++i) {
    EXPECT_EQ(a.settings[i].all.auc, b.settings[i].all.auc);
    EXPECT_EQ(a.settings[i].all.fairness.sf, b.settings[i].all.fairness.sf);
  }
  EXPECT_EQ(params.flatten(), before);
  EXPECT_EQ(weights_digest(s.syn.scorer), digest);
}

TEST(Evaluate, EmptyTestSplitIsAnError) {
  const auto& s = setup();
  EXPECT_THROW(evaluate(inputs(s, s.syn.scorer), {}, kAll, EvalSetting::kExplicit), InputError);
}

TEST(Profiles, DistinctHistoryItemsPerUser) {
  MatrixXd F = MatrixXd::Zero(4, 2);
  F(0, 0) = 1;
  F(1, 1) = 1;
  Sequence a, b;
  a.user = 0;
  b.user = 0;
  a.history = {{0, 5}, {2, 5}};
  b.history = {{0, 5}, {1, 5}};
  auto P = split_profiles(2, {a, b}, F);
  // Distinct items {0, 1, 2}: one A, one B.
  EXPECT_DOUBLE_EQ(P(0, 0), 1.0 / 3);
  EXPECT_DOUBLE_EQ(P(0, 1), 1.0 / 3);
  EXPECT_EQ(P(1, 0), 0.0);
}

}  // namespace
}  // namespace sfmos
