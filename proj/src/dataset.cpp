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

#include "sfmos/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace sfmos {

namespace {

bool as_integer(const std::string& s, long long* out) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (std::size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
  if (s.size() > 18) return false;
  *out = std::stoll(s);
  return true;
}

struct CsvRows {
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

CsvRows read_csv(const std::string& path, const std::string& header, std::size_t ncols) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  CsvRows out;
  std::string line;
  int lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!seen_header) {
      if (trim(line) != header)
        throw InputError(path + ":" + std::to_string(lineno) + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != ncols)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(ncols) +
                       " fields, got " + std::to_string(cols.size()));
    for (auto& c : cols) c = trim(c);
    out.rows.push_back(std::move(cols));
    out.lines.push_back(lineno);
  }
  if (!seen_header) throw InputError(path + ": missing header");
  return out;
}

std::vector<int> parse_tokens(const std::string& field, const std::string& where) {
  std::vector<int> out;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) {
    long long v = parse_int(tok, where);
    if (v < 0) throw InputError(where + ": negative token id");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string join_tokens(const std::vector<int>& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(t[i]);
  }
  return s;
}

}  // namespace

bool item_id_less(const std::string& a, const std::string& b) {
  long long x = 0, y = 0;
  if (as_integer(a, &x) && as_integer(b, &y)) return x < y;
  return a < b;
}

std::vector<int> InteractionDataset::group_sizes() const {
  std::vector<int> n(group_set.size(), 0);
  for (auto& u : users) ++n[u.group];
  return n;
}

void InteractionDataset::index() {
  histories.assign(users.size(), {});
  for (std::size_t i = 0; i < interactions.size(); ++i)
    histories[interactions[i].user].push_back(static_cast<int>(i));
  for (auto& h : histories) {
    std::sort(h.begin(), h.end(), [&](int a, int b) {
      const auto& x = interactions[a];
      const auto& y = interactions[b];
      if (x.timestamp != y.timestamp) return x.timestamp < y.timestamp;
      const auto& ia = items[x.item].item_id;
      const auto& ib = items[y.item].item_id;
      if (item_id_less(ia, ib)) return true;
      if (item_id_less(ib, ia)) return false;
      return a < b;
    });
  }
}

int InteractionDataset::max_title_token() const {
  int m = -1;
  for (auto& it : items)
    for (int t : it.title_tokens) m = std::max(m, t);
  return m;
}

InteractionDataset load_dataset(const std::string& users_path, const std::string& items_path,
                                const std::string& interactions_path,
                                const std::vector<std::string>& group_set, int rating_min,
                                int rating_max, int rating_median) {
  if (group_set.size() < 2) throw InputError("group_set needs at least 2 groups");
  if (rating_min > rating_max || rating_median < rating_min || rating_median > rating_max)
    throw InputError("rating_median outside rating scale");
  InteractionDataset ds;
  ds.group_set = group_set;
  ds.rating_min = rating_min;
  ds.rating_max = rating_max;
  ds.rating_median = rating_median;

  std::map<std::string, int> group_index;
  for (std::size_t g = 0; g < group_set.size(); ++g) group_index[group_set[g]] = static_cast<int>(g);

  std::unordered_map<std::string, int> user_index, item_index;
  auto users = read_csv(users_path, "user_id,group,attribute_tokens", 3);
  for (std::size_t r = 0; r < users.rows.size(); ++r) {
    const auto& c = users.rows[r];
    std::string where = users_path + ":" + std::to_string(users.lines[r]);
    if (c[0].empty()) throw InputError(where + ": empty user_id");
    auto g = group_index.find(c[1]);
    if (g == group_index.end()) throw InputError(where + ": unknown group label '" + c[1] + "'");
    if (!user_index.emplace(c[0], static_cast<int>(ds.users.size())).second)
      throw InputError(where + ": duplicate user_id '" + c[0] + "'");
    ds.users.push_back({c[0], g->second, parse_tokens(c[2], where)});
  }
  auto items = read_csv(items_path, "item_id,title_tokens", 2);
  for (std::size_t r = 0; r < items.rows.size(); ++r) {
    const auto& c = items.rows[r];
    std::string where = items_path + ":" + std::to_string(items.lines[r]);
    if (c[0].empty()) throw InputError(where + ": empty item_id");
    auto toks = parse_tokens(c[1], where);
    if (toks.empty()) throw InputError(where + ": empty title_tokens");
    if (!item_index.emplace(c[0], static_cast<int>(ds.items.size())).second)
      throw InputError(where + ": duplicate item_id '" + c[0] + "'");
    ds.items.push_back({c[0], std::move(toks)});
  }
  auto inter = read_csv(interactions_path, "user_id,item_id,rating,timestamp", 4);
  std::set<std::tuple<int, int, long long>> seen;
  for (std::size_t r = 0; r < inter.rows.size(); ++r) {
    const auto& c = inter.rows[r];
    std::string where = interactions_path + ":" + std::to_string(inter.lines[r]);
    auto u = user_index.find(c[0]);
    if (u == user_index.end()) throw InputError(where + ": unknown user_id '" + c[0] + "'");
    auto v = item_index.find(c[1]);
    if (v == item_index.end()) throw InputError(where + ": unknown item_id '" + c[1] + "'");
    long long rating = parse_int(c[2], where + " rating");
    if (rating < rating_min || rating > rating_max)
      throw InputError(where + ": rating " + c[2] + " outside scale");
    long long ts = parse_int(c[3], where + " timestamp");
    if (!seen.emplace(u->second, v->second, ts).second) continue;
    ds.interactions.push_back({u->second, v->second, static_cast<int>(rating), ts});
  }
  ds.index();
  return ds;
}

void write_dataset_csv(const InteractionDataset& ds, const std::string& dir) {
  std::ostringstream u, i, x;
  u << "user_id,group,attribute_tokens\n";
  for (auto& r : ds.users)
    u << r.user_id << ',' << ds.group_set[r.group] << ',' << join_tokens(r.attribute_tokens) << '\n';
  i << "item_id,title_tokens\n";
  for (auto& r : ds.items) i << r.item_id << ',' << join_tokens(r.title_tokens) << '\n';
  x << "user_id,item_id,rating,timestamp\n";
  for (auto& r : ds.interactions)
    x << ds.users[r.user].user_id << ',' << ds.items[r.item].item_id << ',' << r.rating << ','
      << r.timestamp << '\n';
  write_file(dir + "/users.csv", u.str());
  write_file(dir + "/items.csv", i.str());
  write_file(dir + "/interactions.csv", x.str());
}

SequenceSet build_sequences(const InteractionDataset& ds, std::size_t max_sequences,
                            std::uint64_t seed) {
  SequenceSet out;
  std::vector<std::pair<int, int>> windows;
  for (std::size_t u = 0; u < ds.histories.size(); ++u) {
    int n = static_cast<int>(ds.histories[u].size());
    if (n < kWindowLength) {
      ++out.skipped_users;
      continue;
    }
    for (int s = 0; s + kWindowLength <= n; ++s) windows.emplace_back(static_cast<int>(u), s);
  }
  if (windows.empty()) throw InputError("no user has at least 11 interactions");
  std::mt19937_64 rng(seed);
  std::size_t take = std::min(max_sequences, windows.size());
  // Partial Fisher-Yates: the first `take` slots are a uniform sample without replacement.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, windows.size() - 1);
    std::swap(windows[i], windows[pick(rng)]);
  }
  out.sequences.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    auto [u, s] = windows[i];
    Sequence seq;
    seq.user = u;
    for (int k = 0; k < kWindowLength; ++k) {
      const auto& it = ds.interactions[ds.histories[u][s + k]];
      RatedItem ri{it.item, it.rating};
      if (k < kHistoryLength)
        seq.history.push_back(ri);
      else
        seq.target = ri;
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

DataSplit leave_one_out_split(const std::vector<Sequence>& sequences, std::uint64_t seed) {
  const std::size_t n = sequences.size();
  if (n < 10) throw InputError("need at least 10 sequences to split, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t nv = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const std::size_t nt = nv;
  DataSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seq = sequences[perm[i]];
    if (i < n - nv - nt)
      s.train.push_back(seq);
    else if (i < n - nt)
      s.validation.push_back(seq);
    else
      s.test.push_back(seq);
  }
  return s;
}

void SyntheticConfig::validate() const {
  if (n_users < 1) throw InputError("n_users must be positive");
  if (n_items < 1) throw InputError("n_items must be positive");
  if (group_ratio.size() < 2) throw InputError("group_ratio needs at least 2 entries");
  double sum = 0;
  for (double r : group_ratio) {
    if (!(r > 0)) throw InputError("group_ratio entries must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InputError("group_ratio must sum to 1");
  if (!group_labels.empty() && group_labels.size() != group_ratio.size())
    throw InputError("group_labels and group_ratio differ in length");
  if (!(affinity >= 0 && affinity <= 1)) throw InputError("affinity must lie in [0,1]");
  if (rating_min > rating_median - 1 || rating_median > rating_max)
    throw InputError("rating scale must contain median and a value below it");
  if (interactions_per_user < 1 || interactions_per_user > n_items)
    throw InputError("interactions_per_user must lie in [1, n_items]");
  if (!(neutral_fraction >= 0 && neutral_fraction < 1))
    throw InputError("neutral_fraction must lie in [0,1)");
  if (!(affinity_concentration > 0)) throw InputError("affinity_concentration must be positive");
}

namespace {

double sample_beta(std::mt19937_64& rng, double a, double b) {
  // Degenerate endpoints: affinity 0 or 1.
  if (a <= 0) return 0.0;
  if (b <= 0) return 1.0;
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

int rating_from_latent(double s, int lo, int hi, int median) {
  if (s >= 0) return std::min(hi, median + static_cast<int>(std::floor(s)));
  return std::max(lo, median - 1 - static_cast<int>(std::floor(-s)));
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int G = static_cast<int>(cfg.group_ratio.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SyntheticData out;
  auto& ds = out.dataset;
  for (int g = 0; g < G; ++g)
    ds.group_set.push_back(cfg.group_labels.empty() ? "g" + std::to_string(g) : cfg.group_labels[g]);
  ds.rating_min = cfg.rating_min;
  ds.rating_max = cfg.rating_max;
  ds.rating_median = cfg.rating_median;

  std::discrete_distribution<int> pick_group(cfg.group_ratio.begin(), cfg.group_ratio.end());
  std::vector<double> a(cfg.n_users);
  for (int u = 0; u < cfg.n_users; ++u) {
    int g = pick_group(rng);
    ds.users.push_back({std::to_string(u), g, {g}});
  }
  for (int u = 0; u < cfg.n_users; ++u)
    a[u] = sample_beta(rng, cfg.affinity * cfg.affinity_concentration,
                       (1 - cfg.affinity) * cfg.affinity_concentration);

  std::vector<double> pool_probs{cfg.neutral_fraction};
  for (double r : cfg.group_ratio) pool_probs.push_back((1 - cfg.neutral_fraction) * r);
  std::discrete_distribution<int> pick_pool(pool_probs.begin(), pool_probs.end());
  out.item_pool.resize(cfg.n_items);
  for (int v = 0; v < cfg.n_items; ++v) out.item_pool[v] = pick_pool(rng) - 1;
  std::vector<double> quality(cfg.n_items), wpop(cfg.n_items);
  for (int v = 0; v < cfg.n_items; ++v) quality[v] = normal(rng);
  for (int v = 0; v < cfg.n_items; ++v) wpop[v] = std::exp(cfg.popularity_spread * normal(rng));
  double mean_pop = std::accumulate(wpop.begin(), wpop.end(), 0.0) / cfg.n_items;
  out.item_strength.resize(cfg.n_items);
  for (int v = 0; v < cfg.n_items; ++v) out.item_strength[v] = wpop[v] / mean_pop;
  for (int v = 0; v < cfg.n_items; ++v) ds.items.push_back({std::to_string(v), {v}});

  // Neutral items are drawn at their item share; affinity then splits the
  // planted draws between the user's own pool and the other groups' pools.
  std::vector<int> neutral;
  for (int v = 0; v < cfg.n_items; ++v)
    if (out.item_pool[v] < 0) neutral.push_back(v);
  const double p_neutral = static_cast<double>(neutral.size()) / cfg.n_items;
  std::vector<std::vector<int>> own(G), other(G);
  for (int g = 0; g < G; ++g) {
    for (int v = 0; v < cfg.n_items; ++v) {
      if (out.item_pool[v] < 0) continue;
      (out.item_pool[v] == g ? own : other)[g].push_back(v);
    }
    bool used = std::any_of(ds.users.begin(), ds.users.end(), [&](auto& u) { return u.group == g; });
    if (used && own[g].empty() && cfg.affinity > 0)
      throw InputError("group '" + ds.group_set[g] + "' has users but its item pool is empty");
  }
  auto weights = [&](const std::vector<int>& c) {
    std::vector<double> w;
    for (int v : c) w.push_back(wpop[v]);
    return std::discrete_distribution<int>(w.begin(), w.end());
  };
  auto neutral_d = weights(neutral);
  std::vector<std::discrete_distribution<int>> own_d, other_d;
  for (int g = 0; g < G; ++g) {
    own_d.push_back(weights(own[g]));
    other_d.push_back(weights(other[g]));
  }

  for (int u = 0; u < cfg.n_users; ++u) {
    const int g = ds.users[u].group;
    std::vector<int> chosen;
    std::vector<char> taken(cfg.n_items, 0);
    while (static_cast<int>(chosen.size()) < cfg.interactions_per_user) {
      const bool planted_left = !own[g].empty() || !other[g].empty();
      if (!neutral.empty() && (!planted_left || unif(rng) < p_neutral)) {
        int v = neutral[neutral_d(rng)];
        if (!taken[v]) {
          taken[v] = 1;
          chosen.push_back(v);
        }
        continue;
      }
      bool from_own = unif(rng) < a[u];
      if (from_own && own[g].empty()) from_own = false;
      if (!from_own && other[g].empty()) from_own = true;
      int v = from_own ? own[g][own_d[g](rng)] : other[g][other_d[g](rng)];
      if (taken[v]) continue;
      taken[v] = 1;
      chosen.push_back(v);
    }
    std::shuffle(chosen.begin(), chosen.end(), rng);
    for (std::size_t t = 0; t < chosen.size(); ++t) {
      int v = chosen[t];
      double c = out.item_pool[v] < 0 ? 0.0 : (out.item_pool[v] == g ? 1.0 : -1.0);
      double s = cfg.preference_strength * (2 * a[u] - 1) * c * out.item_strength[v] +
                 cfg.quality_scale * quality[v] + cfg.noise_scale * normal(rng) - cfg.like_offset;
      ds.interactions.push_back(
          {u, v, rating_from_latent(s, cfg.rating_min, cfg.rating_max, cfg.rating_median),
           static_cast<long long>(t + 1)});
    }
  }
  ds.index();
  return out;
}

}  // namespace sfmos
