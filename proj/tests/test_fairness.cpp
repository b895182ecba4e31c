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

#include "sfmos/fairness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace sfmos {
namespace {

// Two items: 0 flagged A, 1 flagged B.
MatrixXd two_flags() {
  MatrixXd f = MatrixXd::Zero(2, 2);
  f(0, 0) = 1;
  f(1, 1) = 1;
  return f;
}

MatrixXd profile(double a, double b) {
  MatrixXd h(1, 2);
  h << a, b;
  return h;
}

RecommendationSet both_items_to_user0() { return make_recommendations({0, 0}, {0, 1}, {0.9, 0.8}, 0.5); }

TEST(HardSF, CalibratedCaseIsZero) {
  auto r = stereotype_fairness(both_items_to_user0(), profile(0.5, 0.5), two_flags());
  EXPECT_DOUBLE_EQ(r.per_group[0].ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.per_group[1].ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.sf, 0.0);
  EXPECT_FALSE(r.degenerate);
}

TEST(HardSF, HandCase) {
  auto r = stereotype_fairness(both_items_to_user0(), profile(0.6, 0.2), two_flags());
  EXPECT_NEAR(r.per_group[0].ratio, 1.2, 1e-15);
  EXPECT_NEAR(r.per_group[1].ratio, 0.4, 1e-15);
  EXPECT_NEAR(r.sf, 0.2, 1e-15);
  EXPECT_EQ(r.n_entries, 2);
}

TEST(HardSF, UncoveredGroupIsExcluded) {
  auto recs = make_recommendations({0}, {0}, {0.9}, 0.5);
  auto r = stereotype_fairness(recs, profile(0.6, 0.2), two_flags());
  ASSERT_EQ(r.excluded_groups, (std::vector<int>{1}));
  EXPECT_FALSE(r.per_group[1].coverage_ok);
  EXPECT_NEAR(r.sf, 1.0 - 0.6, 1e-15);
}

TEST(HardSF, NegativeDecisionsAreNotRecommendations) {
  auto recs = make_recommendations({0, 0}, {0, 1}, {0.9, 0.2}, 0.5);
  auto r = stereotype_fairness(recs, profile(0.6, 0.2), two_flags());
  EXPECT_EQ(r.n_entries, 1);
  EXPECT_EQ(r.excluded_groups, (std::vector<int>{1}));
}

TEST(HardSF, EmptyOrUnflaggedSetIsDegenerate) {
  auto none = make_recommendations({0}, {0}, {0.1}, 0.5);
  auto r = stereotype_fairness(none, profile(0.6, 0.2), two_flags());
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isnan(r.sf));
  auto neutral = make_recommendations({0}, {0}, {0.9}, 0.5);
  auto r2 = stereotype_fairness(neutral, profile(0.6, 0.2), MatrixXd::Zero(1, 2));
  EXPECT_TRUE(r2.degenerate);
}

// A score sitting exactly on the threshold is not a recommendation, so a flat 0.5 scorer recommends nothing.
TEST(HardSF, DecisionIsStrictlyAboveThreshold) {
  auto recs = make_recommendations({0, 0}, {0, 1}, {0.5, 0.5000001}, 0.5);
  EXPECT_FALSE(recs.entries[0].decision);
  EXPECT_TRUE(recs.entries[1].decision);
}

TEST(HardSF, BoundedAboveByOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int rep = 0; rep < 300; ++rep) {
    const int nu = 1 + rng() % 6, ni = 1 + rng() % 10, G = 2 + rng() % 2;
    MatrixXd h = MatrixXd::NullaryExpr(nu, G, [&] { return unit(rng) / G; });
    MatrixXd f = MatrixXd::Zero(ni, G);
    for (int v = 0; v < ni; ++v) f(v, rng() % G) = rng() % 2;
    std::vector<int> us, is;
    std::vector<double> sc;
    for (int k = 0; k < 12; ++k) {
      us.push_back(rng() % nu);
      is.push_back(rng() % ni);
      sc.push_back(unit(rng));
    }
    auto r = stereotype_fairness(make_recommendations(us, is, sc, 0.5), h, f);
    if (!r.degenerate) EXPECT_LE(r.sf, 1.0);
  }
}

// Soft SF, written against the same hand case.
struct SoftCase {
  VectorXd p;
  MatrixXd H, F;
};

SoftCase hand_soft(double pv) {
  SoftCase c;
  c.p = VectorXd::Constant(2, pv);
  c.H.resize(2, 2);
  c.H << 0.6, 0.2, 0.6, 0.2;
  c.F = two_flags();
  return c;
}

TEST(SoftSF, HardLimitAgreesWithHandCase) {
  auto c = hand_soft(1.0);
  EXPECT_NEAR(soft_stereotype_fairness<double>(c.p, c.H, c.F, 1e-8), 0.2, 1e-6);
}

TEST(SoftSF, ConstantProbabilityCancels) {
  for (double pv : {0.05, 0.3, 0.9}) {
    auto c = hand_soft(pv);
    EXPECT_NEAR(soft_stereotype_fairness<double>(c.p, c.H, c.F, 1e-8), 0.2, 1e-6);
  }
}

TEST(SoftSF, SelfCalibratedSingleton) {
  VectorXd p(1);
  p << 0.7;
  MatrixXd H(1, 2), F(1, 2);
  H << 1, 0;
  F << 1, 0;
  EXPECT_NEAR(soft_stereotype_fairness<double>(p, H, F, 1e-8), 0.0, 1e-7);
}

TEST(SoftSF, NoFlaggedMassGivesZero) {
  VectorXd p = VectorXd::Constant(3, 0.5);
  MatrixXd H = MatrixXd::Constant(3, 2, 0.3), F = MatrixXd::Zero(3, 2);
  VectorXd grad;
  EXPECT_EQ(soft_stereotype_fairness<double>(p, H, F, 1e-8, &grad), 0.0);
  EXPECT_EQ(grad.norm(), 0.0);
}

TEST(SoftSF, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + rng() % 10, G = 2 + rng() % 2;
    VectorXd p = VectorXd::NullaryExpr(n, [&] { return unit(rng); });
    MatrixXd H = MatrixXd::NullaryExpr(n, G, [&] { return unit(rng) / G; });
    MatrixXd F = MatrixXd::Zero(n, G);
    for (int i = 0; i < n; ++i) F(i, rng() % G) = 1;
    VectorXd grad;
    soft_stereotype_fairness<double>(p, H, F, 1e-8, &grad);
    for (int i = 0; i < n; ++i) {
      VectorXd up = p, dn = p;
      up(i) += 1e-6;
      dn(i) -= 1e-6;
      const double num = (soft_stereotype_fairness<double>(up, H, F, 1e-8) -
                          soft_stereotype_fairness<double>(dn, H, F, 1e-8)) /
                         2e-6;
      worst = std::max(worst, std::abs(num - grad(i)) / std::max({std::abs(num), std::abs(grad(i)), 1e-6}));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Pairing, KindsFollowFlags) {
  MatrixXd f = MatrixXd::Zero(3, 2);
  f(0, 0) = 1;
  f(1, 1) = 1;
  EXPECT_EQ(pair_kind(0, f, 0), PairKind::kConsistent);
  EXPECT_EQ(pair_kind(0, f, 1), PairKind::kInconsistent);
  EXPECT_EQ(pair_kind(1, f, 2), PairKind::kNeutral);
}

TEST(Pairing, AllNeutralIsDegenerateForBoth) {
  auto recs = make_recommendations({0, 1}, {0, 1}, {0.9, 0.9}, 0.5);
  MatrixXd h = MatrixXd::Constant(2, 2, 0.2);
  auto p = fairness_by_pairing(recs, {0, 1}, MatrixXd::Zero(2, 2), h);
  EXPECT_TRUE(p.consistent.degenerate);
  EXPECT_TRUE(p.inconsistent.degenerate);
  EXPECT_EQ(p.n_unpaired, 2);
}

// Four entries: recount each partition by hand.
TEST(Pairing, FourEntryFixtureMatchesRecount) {
  MatrixXd f = MatrixXd::Zero(3, 2);
  f(0, 0) = 1;
  f(1, 1) = 1;
  MatrixXd h(2, 2);
  h << 0.5, 0.1,   // user 0, group A
      0.2, 0.4;    // user 1, group B
  auto recs = make_recommendations({0, 0, 1, 1}, {0, 1, 1, 0}, {0.9, 0.9, 0.9, 0.9}, 0.5);
  auto p = fairness_by_pairing(recs, {0, 1}, f, h);
  EXPECT_EQ(p.n_consistent, 2);
  EXPECT_EQ(p.n_inconsistent, 2);
  // consistent: (0,item0) and (1,item1): ratio_A = (0.5+0.2)/1, ratio_B = (0.1+0.4)/1
  EXPECT_NEAR(p.consistent.sf, 1.0 - (0.7 + 0.5) / 2, 1e-15);
  // inconsistent: (0,item1) and (1,item0): same users, so same sums
  EXPECT_NEAR(p.inconsistent.sf, 1.0 - (0.7 + 0.5) / 2, 1e-15);
}

}  // namespace
}  // namespace sfmos
