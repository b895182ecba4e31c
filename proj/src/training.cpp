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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sfmos {

void TrainConfig::validate() const {
  if (epochs < 0) throw InputError("epochs must be >= 0");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw InputError("learning_rate must be positive");
  if (N < 1 || L < 1) throw InputError("N and L must be >= 1");
  if (K < 1 || K > N) throw InputError("K must lie in [1, N]");
  if (lambda_fair < 0 || lambda_expert < 0) throw InputError("lambdas must be >= 0");
  if (diversity_on == DiversityTarget::kWeights && N < 2 && lambda_expert > 0)
    throw InputError("expert diversity needs N >= 2");
  if (!(epsilon > 0)) throw InputError("epsilon must be positive");
  if (patience < 0) throw InputError("patience must be >= 0");
}

double rec_loss(double like_prob, int label) {
  const double p = std::clamp(like_prob, kProbClamp, 1 - kProbClamp);
  return label ? -std::log(p) : -std::log(1 - p);
}

double fair_loss(const VectorXd& p, const MatrixXd& H, const MatrixXd& F, double eps) {
  return std::abs(soft_stereotype_fairness<double>(p, H, F, eps));
}

namespace {

// First pair (i<j) minimizing sq(i, j).
template <typename Dist>
std::pair<int, int> min_pair(int n, Dist sq, double* best) {
  std::pair<int, int> arg{0, 1};
  *best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = sq(i, j);
      if (v < *best) {
        *best = v;
        arg = {i, j};
      }
    }
  return arg;
}

}  // namespace

double expert_diversity_loss(const VectorXd& w, VectorXd* grad) {
  const int n = static_cast<int>(w.size());
  if (n < 2) throw InputError("expert diversity needs at least 2 experts");
  double best = 0;
  auto [i, j] = min_pair(n, [&](int a, int b) { return (w(a) - w(b)) * (w(a) - w(b)); }, &best);
  if (grad) {
    grad->setZero(n);
    (*grad)(i) = -2 * (w(i) - w(j));
    (*grad)(j) = 2 * (w(i) - w(j));
  }
  return -best;
}

LossBreakdown total_loss(double l_rec, double l_fair, double l_expert, double lambda_fair,
                         double lambda_expert) {
  LossBreakdown b;
  b.l_rec = l_rec;
  b.l_fair = l_fair;
  b.l_expert = l_expert;
  b.lambda_fair = lambda_fair;
  b.lambda_expert = lambda_expert;
  b.l_total = l_rec + lambda_fair * l_fair + lambda_expert * l_expert;
  return b;
}

namespace {

// -min over expert pairs of squared distance between flattened outputs.
double output_diversity(const std::vector<VectorXd>& E, std::vector<VectorXd>* grad) {
  const int n = static_cast<int>(E.size());
  if (n < 2) {
    if (grad) grad->assign(n, VectorXd::Zero(E.empty() ? 0 : E[0].size()));
    return 0;
  }
  double best = 0;
  auto [i, j] = min_pair(n, [&](int a, int b) { return (E[a] - E[b]).squaredNorm(); }, &best);
  if (grad) {
    grad->assign(n, VectorXd::Zero(E[0].size()));
    (*grad)[i] = -2 * (E[i] - E[j]);
    (*grad)[j] = 2 * (E[i] - E[j]);
  }
  return -best;
}

VectorXd flat_expert(const MoSParams<double>& p, int n, const VectorXd& x) {
  return p.static_experts ? VectorXd(p.expert_b[n]) : VectorXd(p.expert_w[n] * x + p.expert_b[n]);
}

}  // namespace

LossBreakdown batch_loss(const MoSParams<double>& params, const FrozenScorer<double>& sc,
                         const TemplateCache<double>& tc, const TrainBatch& batch,
                         const TrainConfig& cfg, MoSParams<double>* grad, int threads) {
  const auto& ex = *batch.ex;
  const std::size_t B = batch.rows.size();
  if (B == 0) throw InputError("empty batch");
  const int G = static_cast<int>(tc.sums.size());
  const int N = params.N, L = params.L, d = params.d;

  std::vector<RoutingTrace<double>> tr(B);
  parallel_for(B, threads, [&](std::size_t i) { tr[i] = mos_forward_pooled(params, sc, ex.pooled[batch.rows[i]], tc); });

  VectorXd p(B);
  MatrixXd H(B, ex.H.cols()), F(B, ex.F.cols());
  double lrec = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t r = batch.rows[i];
    p(i) = std::clamp(tr[i].y, kProbClamp, 1 - kProbClamp);
    H.row(i) = ex.H.row(r);
    F.row(i) = ex.F.row(r);
    lrec += rec_loss(tr[i].y, ex.labels[r]);
  }
  lrec /= B;

  double lfair = 0;
  VectorXd dsf;
  if (cfg.lambda_fair > 0) {
    double sf = soft_stereotype_fairness<double>(p, H, F, cfg.epsilon, &dsf);
    lfair = std::abs(sf);
    dsf *= (sf > 0) ? 1.0 : (sf < 0 ? -1.0 : 0.0);
  }

  double lexp = 0;
  std::vector<VectorXd> gw(B);
  std::vector<std::vector<VectorXd>> gE(B);
  std::vector<std::vector<VectorXd>> Eout(B);
  for (std::size_t i = 0; i < B; ++i) {
    if (grad || cfg.diversity_on == DiversityTarget::kExpertOutputs)
      for (int n = 0; n < N; ++n) Eout[i].push_back(flat_expert(params, n, tr[i].x_rec));
    if (cfg.lambda_expert > 0) {
      if (cfg.diversity_on == DiversityTarget::kWeights)
        lexp += expert_diversity_loss(tr[i].w, grad ? &gw[i] : nullptr);
      else
        lexp += output_diversity(Eout[i], grad ? &gE[i] : nullptr);
    }
  }
  lexp /= B;

  LossBreakdown out = total_loss(lrec, lfair, lexp, cfg.lambda_fair, cfg.lambda_expert);
  if (!grad) return out;

  *grad = zero_like(params);
  for (std::size_t i = 0; i < B; ++i) {
    const auto& t = tr[i];
    const int label = ex.labels[batch.rows[i]];
    double dy = 0;
    if (t.y > kProbClamp && t.y < 1 - kProbClamp)
      dy = (label ? -1.0 / p(i) : 1.0 / (1 - p(i))) / B + (cfg.lambda_fair > 0 ? cfg.lambda_fair * dsf(i) : 0.0);
    // Every soft-prompt row shares this gradient.
    const VectorXd g_row = t.dctx * (dy * t.y * (1 - t.y) / t.n_ctx);

    VectorXd dw(N);
    for (int n = 0; n < N; ++n) {
      double acc = 0;
      for (int l = 0; l < L; ++l) acc += Eout[i][n].segment(l * d, d).dot(g_row);
      dw(n) = acc;
    }
    if (cfg.lambda_expert > 0 && cfg.diversity_on == DiversityTarget::kWeights)
      dw += gw[i] * (cfg.lambda_expert / B);

    const VectorXd ds = t.w.cwiseProduct(dw - VectorXd::Constant(N, t.w.dot(dw)));
    grad->reweight_w.noalias() += ds * t.avg.transpose();
    grad->reweight_b += ds;
    const VectorXd dm = params.reweight_w.transpose() * ds / double(G);
    for (int g = 0; g < G; ++g) {
      VectorXd dp = VectorXd::Zero(N);
      double inner = 0;
      for (int k : t.kept[g]) inner += t.masked(g, k) * dm(k);
      for (int k : t.kept[g]) dp(k) = t.masked(g, k) * (dm(k) - inner);
      const VectorXd raw = t.raw.row(g).transpose();
      const VectorXd dr = raw.cwiseProduct(dp - VectorXd::Constant(N, raw.dot(dp)));
      grad->router_w.noalias() += dr * t.variant_x.row(g);
      grad->router_b += dr;
    }
    for (int n = 0; n < N; ++n) {
      VectorXd dE = g_row.replicate(L, 1) * t.w(n);
      if (cfg.lambda_expert > 0 && cfg.diversity_on == DiversityTarget::kExpertOutputs)
        dE += gE[i][n] * (cfg.lambda_expert / B);
      if (!params.static_experts) grad->expert_w[n].noalias() += dE * t.x_rec.transpose();
      grad->expert_b[n] += dE;
    }
  }
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::size_t n_params)
    : kind_(kind), lr_(lr), m_(VectorXd::Zero(n_params)), v_(VectorXd::Zero(n_params)) {}

void Optimizer::step(MoSParams<double>& params, const MoSParams<double>& grad) {
  VectorXd theta = params.flatten();
  const VectorXd g = grad.flatten();
  ++t_;
  if (kind_ == OptimizerKind::kSgd) {
    theta -= lr_ * g;
  } else {
    m_ = beta1_ * m_ + (1 - beta1_) * g;
    v_ = beta2_ * v_ + (1 - beta2_) * g.cwiseProduct(g);
    const double c1 = 1 - std::pow(beta1_, double(t_));
    const double c2 = 1 - std::pow(beta2_, double(t_));
    theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }
  params.unflatten(theta);
}

FitResult fit(const TrainConfig& cfg, const FitData& data, const FrozenScorer<double>& sc,
              const StereotypeTemplateSet& templates, MoSParams<double> init, int threads,
              const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  init.validate();
  FitResult res;
  res.params = std::move(init);
  if (cfg.epochs == 0) return res;
  const auto& tr = *data.train;
  if (tr.size() == 0) throw InputError("empty training split");
  const auto tc = cache_templates(sc, templates);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, res.params.size());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  MoSParams<double> grad;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      TrainBatch batch{&tr, {}};
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.rows.assign(order.begin() + start, order.begin() + end);
      auto b = batch_loss(res.params, sc, tc, batch, cfg, &grad, threads);
      if (!std::isfinite(b.l_total) || !grad.flatten().allFinite())
        throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(n_batches));
      opt.step(res.params, grad);
      log.train.l_rec += b.l_rec;
      log.train.l_fair += b.l_fair;
      log.train.l_expert += b.l_expert;
      log.train.l_total += b.l_total;
      ++n_batches;
    }
    log.train.l_rec /= n_batches;
    log.train.l_fair /= n_batches;
    log.train.l_expert /= n_batches;
    log.train.l_total /= n_batches;
    log.train.lambda_fair = cfg.lambda_fair;
    log.train.lambda_expert = cfg.lambda_expert;

    log.val_auc = log.val_sf = log.val_l_total = std::numeric_limits<double>::quiet_NaN();
    if (data.validation && data.validation->size() > 0) {
      const auto& va = *data.validation;
      auto scores = score_examples(&res.params, sc, templates, va, threads);
      log.val_auc = auc_or_nan(scores, va.labels);
      auto recs = make_recommendations(va.users, va.items, scores, data.decision_threshold);
      log.val_sf = stereotype_fairness(recs, *data.val_profiles, *data.flags).sf;
      TrainBatch all{&va, {}};
      all.rows.resize(va.size());
      std::iota(all.rows.begin(), all.rows.end(), 0);
      log.val_l_total = batch_loss(res.params, sc, tc, all, cfg, nullptr, threads).l_total;
    }
    res.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (cfg.patience > 0 && std::isfinite(log.val_l_total)) {
      if (log.val_l_total < best_val) {
        best_val = log.val_l_total;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        res.stopped_early = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace sfmos
