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

#include "sfmos/cli.hpp"

#include "sfmos/backbone.hpp"
#include "sfmos/dataset.hpp"
#include "sfmos/evaluation.hpp"
#include "sfmos/fairness.hpp"
#include "sfmos/mos.hpp"
#include "sfmos/pipeline.hpp"
#include "sfmos/stereotype.hpp"
#include "sfmos/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sfmos {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  bool quiet = false;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::uint64_t resolve_seed(const Globals& g, const KeyValueConfig* cfg) {
  if (g.seed_given) return g.seed;
  if (cfg && cfg->has("seed")) return static_cast<std::uint64_t>(cfg->get_int("seed", 0));
  if (const char* env = std::getenv("SF_SEED")) return static_cast<std::uint64_t>(parse_int(env, "SF_SEED"));
  return 0;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir);
}

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["tool_version"] = kToolVersion;
    j_["seed"] = seed;
    j_["config"] = ordered_json::object();
    j_["inputs"] = ordered_json::object();
    j_["outputs"] = ordered_json::object();
  }
  void config(const std::string& k, const std::string& v) { j_["config"][k] = v; }
  void config(const KeyValueConfig& c) {
    for (auto& [k, v] : c.values()) config(k, v);
  }
  void input(const std::string& path) { j_["inputs"][path] = sha256_file(path); }
  void output(const std::string& path) { j_["outputs"][path] = sha256_file(path); }
  void extra(const std::string& k, ordered_json v) { j_[k] = std::move(v); }
  void write(const std::string& dir) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j_["wall_clock_seconds"] = secs;
    write_file(dir + "/manifest.json", dump(j_));
  }

 private:
  ordered_json j_;
  std::chrono::steady_clock::time_point start_;
};

// ---- data directory ----------------------------------------------------

InteractionDataset load_data_dir(const std::string& dir) {
  const std::string meta_path = dir + "/meta.json";
  if (!fs::exists(meta_path)) throw InputError("missing " + meta_path);
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::exception& e) {
    throw InputError(meta_path + ": " + e.what());
  }
  try {
    auto groups = meta.at("group_set").get<std::vector<std::string>>();
    return load_dataset(dir + "/users.csv", dir + "/items.csv", dir + "/interactions.csv", groups,
                        meta.at("rating_min").get<int>(), meta.at("rating_max").get<int>(),
                        meta.at("rating_median").get<int>());
  } catch (const json::exception& e) {
    throw InputError(meta_path + ": " + e.what());
  }
}

void write_meta(const InteractionDataset& ds, const std::string& dir) {
  ordered_json m;
  m["group_set"] = ds.group_set;
  m["rating_min"] = ds.rating_min;
  m["rating_max"] = ds.rating_max;
  m["rating_median"] = ds.rating_median;
  write_file(dir + "/meta.json", dump(m));
}

// ---- JSON views ---------------------------------------------------------

ordered_json fairness_json(const FairnessReport& r, const std::vector<std::string>& groups) {
  ordered_json j;
  j["sf"] = num(r.sf);
  j["degenerate"] = r.degenerate;
  ordered_json pg = ordered_json::object();
  for (std::size_t g = 0; g < r.per_group.size(); ++g) {
    const auto& t = r.per_group[g];
    pg[groups[g]] = {{"h_sum", num(t.h_sum)},
                     {"flag_count", t.flag_count},
                     {"ratio", num(t.ratio)},
                     {"coverage_ok", t.coverage_ok}};
  }
  j["per_group"] = pg;
  ordered_json ex = ordered_json::array();
  for (int g : r.excluded_groups) ex.push_back(groups[g]);
  j["excluded_groups"] = ex;
  j["n_entries"] = r.n_entries;
  j["decision_threshold"] = r.decision_threshold;
  return j;
}

ordered_json subset_json(const SubsetMetrics& m, const std::vector<std::string>& groups) {
  ordered_json j;
  j["n"] = m.n;
  j["auc"] = num(m.auc);
  j["precision"] = num(m.pr.precision);
  j["recall"] = num(m.pr.recall);
  j["precision_defined"] = m.pr.precision_defined;
  j["recall_defined"] = m.pr.recall_defined;
  j["confusion"] = {{"tp", m.pr.tp}, {"fp", m.pr.fp}, {"fn", m.pr.fn}, {"tn", m.pr.tn}};
  j["fairness"] = fairness_json(m.fairness, groups);
  return j;
}

ordered_json metrics_json(const MetricsReport& r, const std::vector<std::string>& groups) {
  ordered_json j;
  const auto& prim = r.at(r.primary);
  j["n_test"] = r.n_test;
  j["decision_threshold"] = r.decision_threshold;
  j["primary_setting"] = setting_name(r.primary);
  j["auc"] = num(prim.all.auc);
  j["precision"] = num(prim.all.pr.precision);
  j["recall"] = num(prim.all.pr.recall);
  ordered_json sf = ordered_json::object();
  for (auto& s : r.settings) sf[setting_name(s.setting)] = num(s.all.fairness.sf);
  j["sf"] = sf;
  ordered_json per = ordered_json::object();
  for (auto& s : r.settings) {
    ordered_json e;
    e["all"] = subset_json(s.all, groups);
    e["consistent"] = subset_json(s.consistent, groups);
    e["inconsistent"] = subset_json(s.inconsistent, groups);
    e["n_unpaired"] = s.n_unpaired;
    per[setting_name(s.setting)] = e;
  }
  j["settings"] = per;
  return j;
}

ordered_json stereotypes_json(const StereotypeArtifacts& a, const InteractionDataset& ds) {
  ordered_json arr = ordered_json::array();
  for (auto& it : a.items) {
    ordered_json e;
    e["item_id"] = ds.items[it.item].item_id;
    ordered_json bias = ordered_json::object(), flagged = ordered_json::object();
    for (int g = 0; g < ds.n_groups(); ++g) {
      bias[ds.group_set[g]] = it.bias[g];
      flagged[ds.group_set[g]] = it.flagged[g];
    }
    e["bias"] = bias;
    e["degree"] = it.degree;
    e["dominant_group"] = it.dominant_group >= 0 ? json(ds.group_set[it.dominant_group]) : json(nullptr);
    e["flagged"] = flagged;
    arr.push_back(e);
  }
  return arr;
}

ordered_json threshold_json(const ThresholdSpec& t) {
  ordered_json j;
  j["z"] = t.z;
  j["mean"] = t.mean;
  j["std"] = t.std;
  j["threshold"] = t.threshold;
  j["population_size"] = t.population_size;
  j["min_interactions"] = t.min_interactions;
  return j;
}

// ---- gen ----------------------------------------------------------------

int cmd_gen(const Globals& g, const std::string& config_path, const std::string& out_dir,
            std::ostream& out) {
  auto cfg = KeyValueConfig::parse_file(config_path);
  cfg.reject_unknown(generator_keys());
  const std::uint64_t seed = resolve_seed(g, &cfg);
  auto setup = make_synthetic_setup(cfg, seed);
  const auto& syn = setup.data;
  const auto& ds = syn.dataset;
  const auto& scorer = setup.scorer;
  ensure_dir(out_dir);
  write_dataset_csv(ds, out_dir);
  write_meta(ds, out_dir);
  {
    std::ostringstream p;
    p << "item_id,pool,strength\n";
    for (std::size_t v = 0; v < ds.items.size(); ++v)
      p << ds.items[v].item_id << ',' << (syn.item_pool[v] < 0 ? "neutral" : ds.group_set[syn.item_pool[v]])
        << ',' << fmt_double(syn.item_strength[v]) << '\n';
    write_file(out_dir + "/item_pools.csv", p.str());
  }
  save_scorer(scorer, out_dir + "/scorer.bin");

  Manifest m("gen", seed);
  m.config(cfg);
  m.input(config_path);
  for (auto f : {"users.csv", "items.csv", "interactions.csv", "meta.json", "item_pools.csv", "scorer.bin"})
    m.output(out_dir + "/" + f);
  m.extra("scorer_digest", weights_digest(scorer));
  m.write(out_dir);
  if (!g.quiet)
    out << "generated " << ds.users.size() << " users, " << ds.items.size() << " items, "
        << ds.interactions.size() << " interactions in " << out_dir << "\n";
  return 0;
}

// ---- shared pipeline for train/eval -------------------------------------

KeyValueConfig load_train_config(const std::string& path) {
  auto cfg = path.empty() ? KeyValueConfig::parse_string("", "<defaults>") : KeyValueConfig::parse_file(path);
  cfg.reject_unknown(train_keys());
  return cfg;
}

// ---- audit --------------------------------------------------------------

int cmd_audit(const Globals& g, const std::string& data_dir, const std::string& out_dir,
              std::vector<double> zs, int min_interactions, double threshold, std::ostream& out) {
  auto ds = load_data_dir(data_dir);
  if (ds.interactions.empty()) throw InputError("no interactions in " + data_dir);
  if (zs.empty()) zs.push_back(2.0);
  ensure_dir(out_dir);
  const auto counts = count_dataset(ds);
  ordered_json sweep = ordered_json::array();
  std::vector<StereotypeArtifacts> arts;
  for (double z : zs) {
    arts.push_back(compute_stereotypes(counts, z, min_interactions));
    sweep.push_back({{"z", z},
                     {"threshold", arts.back().threshold.threshold},
                     {"flagged_items", arts.back().flagged_count()}});
  }
  const auto& a = arts.front();

  // S = observed liked interactions; h from each user's full history.
  MatrixXd profiles = MatrixXd::Zero(ds.users.size(), ds.n_groups());
  for (std::size_t u = 0; u < ds.users.size(); ++u) {
    std::vector<int> hist;
    for (int idx : ds.histories[u]) hist.push_back(ds.interactions[idx].item);
    auto prof = user_history_proportion(hist, a.flags);
    for (int k = 0; k < ds.n_groups(); ++k) profiles(u, k) = prof.h[k];
  }
  RecommendationSet recs;
  recs.decision_threshold = threshold;
  for (auto& x : ds.interactions)
    if (label_from_rating(x.rating, ds.rating_median)) recs.entries.push_back({x.user, x.item, 1.0, true});
  auto rep = stereotype_fairness(recs, profiles, a.flags);

  write_file(out_dir + "/stereotypes.json", dump(stereotypes_json(a, ds)));
  write_file(out_dir + "/threshold.json", dump(threshold_json(a.threshold)));
  write_file(out_dir + "/fairness_report.json", dump(fairness_json(rep, ds.group_set)));
  write_file(out_dir + "/z_sweep.json", dump(sweep));

  Manifest m("audit", resolve_seed(g, nullptr));
  std::string zl;
  for (double z : zs) zl += (zl.empty() ? "" : ",") + fmt_double(z);
  m.config("z", zl);
  m.config("min_interactions", std::to_string(min_interactions));
  for (auto f : {"users.csv", "items.csv", "interactions.csv", "meta.json"}) m.input(data_dir + "/" + f);
  for (auto f : {"stereotypes.json", "threshold.json", "fairness_report.json", "z_sweep.json"})
    m.output(out_dir + "/" + f);
  m.write(out_dir);
  if (!g.quiet)
    out << "audit: " << a.flagged_count() << " flagged items, threshold " << a.threshold.threshold
        << ", SF " << rep.sf << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------

int cmd_train(const Globals& g, const std::string& data_dir, const std::string& scorer_path,
              const std::string& config_path, const std::string& out_dir, const std::string& objective,
              std::ostream& out) {
  auto cfg = load_train_config(config_path);
  const std::uint64_t seed = resolve_seed(g, &cfg);
  auto tc = train_config_from(cfg, seed);
  if (objective == "rec") {
    tc.lambda_fair = 0;
    tc.lambda_expert = 0;
  } else if (objective != "total") {
    throw InputError("objective must be rec or total");
  }
  const auto scorer = load_scorer(scorer_path);
  const std::string digest_before = weights_digest(scorer);
  const auto ds = load_data_dir(data_dir);
  auto p = build_pipeline(ds, cfg, seed, scorer);
  ensure_dir(out_dir);

  auto train_ex = prepare_examples(ds, p.vocab, scorer, p.split.train, p.setting, p.stereo.flags);
  auto val_ex = prepare_examples(ds, p.vocab, scorer, p.split.validation, p.setting, p.stereo.flags);
  MatrixXd val_prof = split_profiles(ds.users.size(), p.split.validation, p.stereo.flags);
  FitData data{&train_ex, &val_ex, &val_prof, &p.stereo.flags, p.decision_threshold};
  auto init = init_mos(tc.N, tc.L, tc.K, scorer.d, seed, tc.init_scale, tc.static_experts);

  std::ostringstream log;
  auto res = fit(tc, data, scorer, p.templates, init, g.threads, [&](const EpochLog& e) {
    ordered_json j;
    j["epoch"] = e.epoch;
    j["l_rec"] = num(e.train.l_rec);
    j["l_fair"] = num(e.train.l_fair);
    j["l_expert"] = num(e.train.l_expert);
    j["l_total"] = num(e.train.l_total);
    j["val_l_total"] = num(e.val_l_total);
    j["val_auc"] = num(e.val_auc);
    j["val_sf"] = num(e.val_sf);
    log << j.dump() << "\n";
    if (!g.quiet)
      out << "epoch " << e.epoch << " l_total " << e.train.l_total << " val_auc " << e.val_auc
          << " val_sf " << e.val_sf << "\n";
  });
  const std::string digest_after = weights_digest(scorer);
  if (digest_after != digest_before) throw NumericalError("scorer weights changed during training");

  save_mos(res.params, p.templates, out_dir + "/mos.bin");
  write_file(out_dir + "/train_log.jsonl", log.str());
  write_file(out_dir + "/stereotypes.json", dump(stereotypes_json(p.stereo, ds)));
  write_file(out_dir + "/threshold.json", dump(threshold_json(p.stereo.threshold)));

  Manifest m("train", seed);
  m.config(cfg);
  m.config("objective", objective);
  if (!config_path.empty()) m.input(config_path);
  m.input(scorer_path);
  for (auto f : {"users.csv", "items.csv", "interactions.csv", "meta.json"}) m.input(data_dir + "/" + f);
  for (auto f : {"mos.bin", "train_log.jsonl", "stereotypes.json", "threshold.json"}) m.output(out_dir + "/" + f);
  m.extra("scorer_digest_before", digest_before);
  m.extra("scorer_digest_after", digest_after);
  m.extra("split", {{"train", p.split.train.size()},
                    {"validation", p.split.validation.size()},
                    {"test", p.split.test.size()},
                    {"skipped_users", p.skipped_users}});
  m.extra("stopped_early", res.stopped_early);
  m.write(out_dir);
  return 0;
}

// ---- eval ---------------------------------------------------------------

int cmd_eval(const Globals& g, const std::string& data_dir, const std::string& scorer_path,
             const std::string& mos_path, const std::string& config_path,
             const std::vector<std::string>& setting_names, const std::string& out_dir,
             std::ostream& out) {
  auto cfg = load_train_config(config_path);
  const std::uint64_t seed = resolve_seed(g, &cfg);
  const auto scorer = load_scorer(scorer_path);
  const std::string digest_before = weights_digest(scorer);
  const auto ds = load_data_dir(data_dir);
  auto p = build_pipeline(ds, cfg, seed, scorer);
  std::vector<EvalSetting> settings;
  for (auto& s : setting_names) settings.push_back(parse_setting(s));

  MoSParams<double> params;
  const MoSParams<double>* pp = nullptr;
  if (!mos_path.empty()) {
    StereotypeTemplateSet t;
    params = load_mos(mos_path, &t);
    if (params.d != scorer.d) throw InputError("MoS width differs from scorer d");
    if (t.templates.size() != static_cast<std::size_t>(ds.n_groups()))
      throw InputError("MoS templates do not match the dataset groups");
    p.templates = t;
    pp = &params;
  }
  EvalInputs in;
  in.ds = &ds;
  in.vocab = &p.vocab;
  in.scorer = &scorer;
  in.params = pp;
  in.templates = &p.templates;
  in.flags = &p.stereo.flags;
  in.decision_threshold = p.decision_threshold;
  in.threads = g.threads;
  auto report = evaluate(in, p.split.test, settings, p.setting);
  if (weights_digest(scorer) != digest_before) throw NumericalError("scorer weights changed during evaluation");

  ensure_dir(out_dir);
  write_file(out_dir + "/metrics.json", dump(metrics_json(report, ds.group_set)));
  Manifest m("eval", seed);
  m.config(cfg);
  std::string sl;
  for (auto& s : setting_names) sl += (sl.empty() ? "" : ",") + s;
  m.config("settings", sl);
  if (!config_path.empty()) m.input(config_path);
  m.input(scorer_path);
  if (!mos_path.empty()) m.input(mos_path);
  for (auto f : {"users.csv", "items.csv", "interactions.csv", "meta.json"}) m.input(data_dir + "/" + f);
  m.output(out_dir + "/metrics.json");
  m.write(out_dir);
  if (!g.quiet) {
    out << "eval: auc " << report.auc();
    for (auto& s : report.settings) out << " sf[" << setting_name(s.setting) << "] " << s.all.fairness.sf;
    out << "\n";
  }
  return 0;
}

// ---- report -------------------------------------------------------------

std::string csv_num(const json& v) { return v.is_null() ? "" : fmt_double(v.get<double>()); }

int cmd_report(const Globals& g, const std::vector<std::string>& runs, const std::string& out_path,
               std::ostream& out) {
  if (runs.empty()) throw InputError("report needs at least one run directory");
  std::vector<std::pair<std::string, json>> loaded;
  for (auto& r : runs) {
    const std::string path = r + "/metrics.json";
    if (!fs::exists(path)) throw InputError("missing " + path);
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
    std::string label = fs::path(r).lexically_normal().filename().string();
    if (label.empty()) label = fs::path(r).lexically_normal().parent_path().filename().string();
    loaded.emplace_back(label, j);
  }
  auto delta = [](const json& a, const json& b) -> json {
    if (a.is_null() || b.is_null()) return nullptr;
    return a.get<double>() - b.get<double>();
  };
  ordered_json cmp;
  ordered_json arr = ordered_json::array(), deltas = ordered_json::array();
  const json& base = loaded.front().second;
  for (auto& [label, j] : loaded) {
    arr.push_back({{"label", label}, {"metrics", j}});
    ordered_json d;
    d["label"] = label;
    d["baseline"] = loaded.front().first;
    for (auto k : {"auc", "precision", "recall"}) d[std::string(k) + "_delta"] = delta(j.value(k, json()), base.value(k, json()));
    ordered_json sf = ordered_json::object();
    if (j.contains("sf"))
      for (auto& [s, v] : j["sf"].items())
        sf[s] = base.contains("sf") && base["sf"].contains(s) ? delta(v, base["sf"][s]) : json(nullptr);
    d["sf_delta"] = sf;
    deltas.push_back(d);
  }
  cmp["runs"] = arr;
  cmp["deltas"] = deltas;
  fs::path outp(out_path);
  if (outp.has_parent_path()) ensure_dir(outp.parent_path().string());
  write_file(out_path, dump(cmp));

  const std::string stem = (outp.parent_path() / outp.stem()).string();
  std::ostringstream bars, curves;
  bars << "label,setting,auc,precision,recall,sf\n";
  curves << "label,epoch,l_rec,l_fair,l_expert,l_total,val_auc,val_sf\n";
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto& [label, j] = loaded[i];
    if (j.contains("settings"))
      for (auto& [s, e] : j["settings"].items()) {
        const auto& a = e["all"];
        bars << label << ',' << s << ',' << csv_num(a["auc"]) << ',' << csv_num(a["precision"]) << ','
             << csv_num(a["recall"]) << ',' << csv_num(a["fairness"]["sf"]) << '\n';
      }
    const std::string log_path = runs[i] + "/train_log.jsonl";
    if (fs::exists(log_path)) {
      std::istringstream in(read_file(log_path));
      std::string line;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto e = json::parse(line);
        curves << label << ',' << e["epoch"].get<int>();
        for (auto k : {"l_rec", "l_fair", "l_expert", "l_total", "val_auc", "val_sf"})
          curves << ',' << csv_num(e.value(k, json()));
        curves << '\n';
      }
    }
  }
  write_file(stem + "_settings.csv", bars.str());
  write_file(stem + "_curves.csv", curves.str());
  if (!g.quiet) out << "report: " << loaded.size() << " runs -> " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereotype-aware fairness audit and mixture-of-stereotypes training"};
  app.require_subcommand(1);
  Globals g;
  long long seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed (falls back to SF_SEED)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  std::string config, out_dir, data, scorer, mos, objective = "total";
  std::vector<double> zs;
  int min_inter = 5;
  double audit_threshold = 0.5;
  std::vector<std::string> settings{"implicit", "explicit", "counterfactual"}, runs;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset and planted scorer");
  gen->add_option("--config", config, "generator key=value file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* audit = app.add_subcommand("audit", "item stereotypes, threshold and data SF");
  audit->add_option("--data", data, "dataset directory")->required();
  audit->add_option("--out", out_dir, "output directory")->required();
  audit->add_option("--z", zs, "Z-score multiplier; repeat for a sweep");
  audit->add_option("--min-interactions", min_inter, "support floor for the threshold population");
  audit->add_option("--decision-threshold", audit_threshold, "recorded decision threshold");

  auto* train = app.add_subcommand("train", "train MoS against the frozen scorer");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--scorer", scorer, "scorer.bin")->required();
  train->add_option("--config", config, "training key=value file");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--objective", objective, "rec or total")->check(CLI::IsMember({"rec", "total"}));

  auto* eval = app.add_subcommand("eval", "evaluate the scorer with or without MoS");
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--scorer", scorer, "scorer.bin")->required();
  eval->add_option("--mos", mos, "mos.bin; omit for the no-MoS baseline");
  eval->add_option("--config", config, "training key=value file (split and threshold keys)");
  eval->add_option("--settings", settings, "implicit, explicit, counterfactual")->delimiter(',');
  eval->add_option("--out", out_dir, "output directory")->required();

  auto* report = app.add_subcommand("report", "compare runs");
  report->add_option("--runs", runs, "run directories holding metrics.json")->required();
  report->add_option("--out", out_dir, "comparison.json path")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;
  if (seed < 0) {
    err << "error: --seed must be non-negative\n";
    return 2;
  }
  g.seed = static_cast<std::uint64_t>(seed);

  try {
    if (*gen) return cmd_gen(g, config, out_dir, out);
    if (*audit) return cmd_audit(g, data, out_dir, zs, min_inter, audit_threshold, out);
    if (*train) return cmd_train(g, data, scorer, config, out_dir, objective, out);
    if (*eval) return cmd_eval(g, data, scorer, mos, config, settings, out_dir, out);
    if (*report) return cmd_report(g, runs, out_dir, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace sfmos
