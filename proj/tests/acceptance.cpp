// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "recbench/recbench.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace recbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "FAILED: " << what << "; ";
    }
  }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

ExperimentData as_data(synth::Dataset d) { return {std::move(d.interactions), std::move(d.content), default_stopwords()}; }

double aggregate(const ExperimentResult& r, const std::string& alg, std::size_t k, const std::string& metric) {
  for (const auto& rec : r.records)
    if (!rec.fold && rec.algorithm == alg && rec.k == k && rec.metric == metric) return rec.value;
  throw Error("missing aggregate " + alg + " " + metric + "@" + std::to_string(k));
}

bool stats_identities_hold(const InteractionDataset& ds) {
  const auto s = compute_stats(ds);
  const double a = static_cast<double>(s.n_activities), u = static_cast<double>(s.n_users),
               i = static_cast<double>(s.n_items);
  return std::abs(s.sparsity - (1.0 - a / (u * i))) <= 1e-12 && std::abs(s.avg_items_per_user - a / u) <= 1e-12 &&
         std::abs(s.avg_users_per_item - a / i) <= 1e-12;
}

// ---------------------------------------------------------------------------

void ac1_statistics(Outcome& out) {
  for (const auto& [name, ds] : {std::pair{"dense", synth::dense().interactions},
                                 std::pair{"sparse", synth::sparse_implicit().interactions},
                                 std::pair{"planted", synth::planted_clusters().interactions}})
    out.require(stats_identities_hold(ds), std::string("identities on ") + name);

  // A dataset with the published MovieLens counts: 6038 users, 3533 items, 575279 activities.
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t users = 6038, items = 3533, acts = 575279;
  std::vector<Interaction> rows;
  rows.reserve(acts);
  const std::size_t base = acts / users, extra = acts % users;
  for (std::size_t u = 0; u < users; ++u) {
    const std::size_t n = base + (u < extra ? 1 : 0);
    const std::size_t start = (u * base) % items;
    for (std::size_t j = 0; j < n; ++j)
      rows.push_back({"u" + std::to_string(u), "i" + std::to_string((start + j) % items), 1.0, std::nullopt});
  }
  const auto ds = InteractionDataset::from_interactions(std::move(rows));
  const auto s = compute_stats(ds);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(s.n_users == users && s.n_items == items && s.n_activities == acts, "MovieLens-shaped counts");
  out.require(std::abs(s.sparsity - 0.9730) <= 0.0001, "sparsity 0.9730 +- 0.0001");
  out.require(std::abs(s.avg_items_per_user - 95.2764) <= 0.001, "avg items/user 95.2764 +- 0.001");
  out.require(stats_identities_hold(ds), "identities on MovieLens-shaped data");
  out.require(secs < 1.0, "runtime < 1 s");
  out.detail << "sparsity=" << fmt(s.sparsity) << " avg_items/user=" << fmt(s.avg_items_per_user)
             << " avg_users/item=" << fmt(s.avg_users_per_item) << " items/users=" << fmt(s.items_per_user_ratio)
             << " build+stats=" << fmt(secs, 3) << "s";
}

void ac2_metric_oracles(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::vector<std::string> items;
  for (int i = 0; i < 8; ++i) items.push_back("i" + std::to_string(i));
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_users = 1 + rng() % 5, k = 1 + rng() % 10;
    EvalInput in;
    in.k = k;
    in.catalog = {items.begin(), items.end()};
    ListsByUser other;
    auto pick = [&](std::size_t n) {
      auto v = items;
      std::shuffle(v.begin(), v.end(), rng);
      v.resize(n);
      return v;
    };
    auto make = [](const std::string& u, const std::vector<std::string>& ids, std::size_t k) {
      RecommendationList l{u, {}, k};
      for (std::size_t r = 0; r < ids.size(); ++r) l.entries.push_back({ids[r], 1.0 / static_cast<double>(r + 1)});
      return l;
    };
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto id = "u" + std::to_string(u);
      const auto h = pick(1 + rng() % 3);
      in.hidden[id] = {h.begin(), h.end()};
      in.lists.emplace(id, make(id, pick(rng() % 9), k));
      other.emplace(id, make(id, pick(rng() % 9), k));
    }
    const bool ok = std::abs(map_at_k(in) - oracle::map(in)) <= 1e-12 &&
                    std::abs(ucov_at_k(in) - oracle::ucov(in)) <= 1e-12 &&
                    std::abs(ccov_at_k(in) - oracle::ccov(in)) <= 1e-12 &&
                    std::abs(jaccard_list_similarity(in.lists, other, k) - oracle::jaccard(in.lists, other, k)) <= 1e-12 &&
                    hit_intersection(in.lists, other, in.hidden, k) == oracle::intersection(in.lists, other, in.hidden, k);
    mismatches += ok ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(mismatches == 0, std::to_string(mismatches) + " of 1000 instances disagree with the oracle");
  out.require(secs < 10.0, "runtime < 10 s");
  out.detail << "1000 instances, " << mismatches << " mismatches, " << fmt(secs, 3) << "s";
}

void ac3_trivial_bounds(Outcome& out) {
  RecommendationList perfect{"u", {}, 10};
  std::set<std::string> hidden;
  for (int i = 0; i < 10; ++i) {
    perfect.entries.push_back({"h" + std::to_string(i), 10.0 - i});
    hidden.insert("h" + std::to_string(i));
  }
  EvalInput in{{{"u", perfect}}, {{"u", hidden}}, hidden, 10};
  const double m = map_at_k(in), u = ucov_at_k(in), j = jaccard_list_similarity(in.lists, in.lists, 10);
  const auto hits = hit_intersection(in.lists, in.lists, in.hidden, 10);
  out.require(m == 1.0, "perfect ranking MAP = 1");
  out.require(u == 1.0, "full lists UCOV = 1");
  out.require(j == 1.0, "identical lists Jaccard = 1");
  out.require(hits.exclusive_a == 0 && hits.exclusive_b == 0 && hits.common == 10, "identical lists have no exclusive hits");
  out.detail << "MAP=" << fmt(m) << " UCOV=" << fmt(u) << " Jaccard=" << fmt(j) << " hits=(" << hits.exclusive_a << ","
             << hits.exclusive_b << "," << hits.common << ")";
}

void ac4_recommender_oracles(Outcome& out) {
  std::mt19937_64 rng(77);
  std::size_t sup_bad = 0, upa_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ContentCorpus c;
    const std::size_t n = 5 + rng() % 46;
    for (std::size_t d = 0; d < n; ++d) {
      std::string text;
      for (std::size_t w = 0; w < 2 + rng() % 8; ++w) text += "term" + std::to_string(rng() % 25) + " ";
      c.add({"doc" + std::to_string(d), {{"Text", text}}});
    }
    const auto idx = std::make_shared<const DocumentIndex>(build_index(c, {"Text"}, {}));
    UserProfile p{"user", {}};
    for (std::size_t i = 0; i < 1 + rng() % 8; ++i) p.items.push_back({idx->item_id(rng() % idx->size()), std::nullopt});
    const std::size_t votes = 1 + rng() % 10, budget = 1 + rng() % 12, k = 1 + rng() % 20;
    sup_bad += recommend_sup(fit_sup(idx, votes), p, k).entries == oracle::sup(*idx, p, votes, k) ? 0 : 1;
    upa_bad += recommend_upa(fit_upa(idx, budget), p, k).entries == oracle::upa(*idx, p, budget, k) ? 0 : 1;
  }
  out.require(sup_bad == 0, "SUP differs from brute force in " + std::to_string(sup_bad) + " trials");
  out.require(upa_bad == 0, "UPA differs from brute force in " + std::to_string(upa_bad) + " trials");

  // 4x5 rating matrix; reference values computed independently (tests/oracles/cf_toy.py).
  std::vector<Interaction> rows;
  for (const auto& [u, i, r] : std::vector<std::tuple<std::string, std::string, double>>{
           {"u1", "i1", 5}, {"u1", "i2", 3}, {"u1", "i4", 1}, {"u2", "i1", 4}, {"u2", "i3", 2}, {"u2", "i4", 1},
           {"u3", "i2", 1}, {"u3", "i3", 5}, {"u3", "i5", 4}, {"u4", "i1", 2}, {"u4", "i5", 5}})
    rows.push_back({u, i, r, std::nullopt});
  const auto train = InteractionDataset::from_interactions(rows);
  const auto cf = fit_cf(train, 2);
  const auto list = recommend_cf(cf, profile_of(train, "u1"), 10);
  const bool cf_ok = std::abs(cf.similarity("u1", "u2") - 0.7745966692414834) <= 1e-12 &&
                     std::abs(cf.similarity("u1", "u3") - 0.07824607964359516) <= 1e-12 &&
                     std::abs(cf.similarity("u1", "u4") - 0.31388241028717223) <= 1e-12 &&
                     std::abs(cf.similarity("u3", "u4") - 0.5730682550612528) <= 1e-12 && list.size() == 2 &&
                     list.entries[0].item_id == "i5" && std::abs(list.entries[0].score - 1.5694120514358612) <= 1e-12 &&
                     list.entries[1].item_id == "i3" && std::abs(list.entries[1].score - 1.5491933384829668) <= 1e-12;
  out.require(cf_ok, "CF 4x5 hand-computed similarities and scores");
  out.detail << "100 trials each: SUP mismatches=" << sup_bad << " UPA mismatches=" << upa_bad
             << "; CF toy matrix " << (cf_ok ? "ok" : "wrong");
}

ExperimentConfig protocol_config(std::vector<std::size_t> ks) {
  ExperimentConfig c;
  c.interactions_path = "synthetic";
  c.content_path = "synthetic";
  c.k_values = std::move(ks);
  return c;
}

// Sparse run shared by criteria 5 and 7.
const ExperimentResult& sparse_run(double* seconds = nullptr) {
  static double elapsed = 0;
  static const ExperimentResult result = [] {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_experiment(protocol_config({10}), as_data(synth::sparse_implicit()));
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  if (seconds) *seconds = elapsed;
  return result;
}

void ac5_user_coverage(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synth::sparse_implicit();
  const auto s = compute_stats(data.interactions);
  out.require(s.sparsity >= 0.999, "sparsity >= 0.999");
  out.require(s.n_items >= 500, ">= 500 items");
  double run_secs = 0;
  const auto& r = sparse_run(&run_secs);
  const double sup = aggregate(r, "sup", 10, "UCOV"), upa = aggregate(r, "upa", 10, "UCOV"),
               cf = aggregate(r, "cf", 10, "UCOV");
  out.require(sup == 1.0 && upa == 1.0, "CB UCOV@10 = 1.0");
  out.require(cf < 0.5, "CF UCOV@10 < 0.5");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() + run_secs;
  out.require(secs < 60.0, "runtime < 60 s");
  out.detail << "users=" << s.n_users << " items=" << s.n_items << " sparsity=" << fmt(s.sparsity, 5)
             << " UCOV@10 sup=" << fmt(sup) << " upa=" << fmt(upa) << " cf=" << fmt(cf) << " (" << fmt(secs, 2) << "s)";
}

void ac6_catalog_coverage(Outcome& out) {
  const auto r = run_experiment(protocol_config({10, 20, 30, 50, 100}), as_data(synth::dense()));
  double prev_sup = 0, prev_upa = 0, prev_cf = 0;
  for (const std::size_t k : {10, 20, 30, 50, 100}) {
    const double sup = aggregate(r, "sup", k, "CCOV"), upa = aggregate(r, "upa", k, "CCOV"),
                 cf = aggregate(r, "cf", k, "CCOV");
    out.require(upa > sup && sup > cf, "UPA > SUP > CF at K=" + std::to_string(k));
    out.require(sup >= prev_sup && upa >= prev_upa && cf >= prev_cf, "CCOV non-decreasing at K=" + std::to_string(k));
    prev_sup = sup;
    prev_upa = upa;
    prev_cf = cf;
    out.detail << "K=" << k << ":" << fmt(upa) << "/" << fmt(sup) << "/" << fmt(cf) << " ";
  }
  // Within one fold the same holds for every K, since the lists are prefixes.
  for (const auto& rec : r.records) {
    if (!rec.fold || rec.metric != "CCOV") continue;
    for (const auto& next : r.records)
      if (next.fold == rec.fold && next.metric == "CCOV" && next.algorithm == rec.algorithm && next.k > rec.k &&
          next.value < rec.value)
        out.require(false, "per-fold CCOV decreased for " + rec.algorithm);
  }
  out.detail << "(upa/sup/cf)";
}

// MAP@10 of a ranker that orders the user's unseen catalog items uniformly at random.
double random_ranker_map(const InteractionDataset& ds, const SplitPlan& plan, std::uint64_t seed) {
  double sum = 0;
  std::size_t users = 0;
  std::mt19937_64 rng(seed);
  for (std::size_t fold = 0; fold < plan.fold_count; ++fold) {
    const auto split = materialize_split(ds, plan, fold);
    for (const auto& [user, hidden] : split.hidden) {
      std::set<std::string> own;
      for (const auto& r : split.train.profile(user)) own.insert(r.item_id);
      std::vector<std::string> pool;
      for (const auto& i : ds.items())
        if (!own.count(i)) pool.push_back(i);
      std::shuffle(pool.begin(), pool.end(), rng);
      RecommendationList list{user, {}, 10};
      for (std::size_t r = 0; r < 10 && r < pool.size(); ++r) list.entries.push_back({pool[r], 1.0});
      sum += average_precision_at_k(list, hidden, 10);
      ++users;
    }
  }
  return sum / static_cast<double>(users);
}

void ac7_precision(Outcome& out) {
  const auto planted = synth::planted_clusters();
  const auto config = protocol_config({10});
  const auto r = run_experiment(config, as_data(planted));
  const auto plan = plan_splits(planted.interactions, config.fold_count, config.given_n, config.min_train_items,
                                config.rng_seed);
  // Averaged over several shuffles so the baseline itself is stable.
  double random_map = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) random_map += random_ranker_map(planted.interactions, plan, s) / 5.0;
  const double sup = aggregate(r, "sup", 10, "MAP"), upa = aggregate(r, "upa", 10, "MAP");
  out.require(random_map > 0.0, "random baseline measurable");
  out.require(sup >= 5.0 * random_map, "SUP MAP@10 >= 5x random");
  out.require(upa >= 5.0 * random_map, "UPA MAP@10 >= 5x random");

  const auto& sparse = sparse_run();
  const double s_sup = aggregate(sparse, "sup", 10, "MAP"), s_upa = aggregate(sparse, "upa", 10, "MAP"),
               s_cf = aggregate(sparse, "cf", 10, "MAP");
  out.require(s_sup > s_cf && s_upa > s_cf, "sparse: CB MAP@10 > CF MAP@10");
  out.detail << "planted MAP@10 sup=" << fmt(sup) << " upa=" << fmt(upa) << " random=" << fmt(random_map)
             << " (x" << fmt(std::min(sup, upa) / random_map, 1) << "); sparse MAP@10 sup=" << fmt(s_sup)
             << " upa=" << fmt(s_upa) << " cf=" << fmt(s_cf);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ac8_protocol_integrity(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto fixture = synth::dense({.users = 200, .topics = 6, .items_per_topic = 40, .min_profile = 12, .max_profile = 50, .in_topic = 0.8, .seed = 99});
  const auto& ds = fixture.interactions;
  const auto config = protocol_config({10, 20, 30, 50, 100});
  const auto plan = plan_splits(ds, config.fold_count, config.given_n, config.min_train_items, config.rng_seed);
  std::size_t tested = 0, violations = 0;
  for (std::size_t fold = 0; fold < config.fold_count; ++fold) {
    const auto split = materialize_split(ds, plan, fold);
    for (const auto& [user, hidden] : split.hidden) {
      ++tested;
      std::set<std::string> original, train;
      for (const auto& r : ds.profile(user)) original.insert(r.item_id);
      for (const auto& r : split.train.profile(user)) train.insert(r.item_id);
      std::set<std::string> joined = train;
      bool disjoint = true;
      for (const auto& h : hidden) disjoint = joined.insert(h).second && disjoint;
      if (!disjoint || joined != original || hidden.size() != config.given_n || train.size() < config.min_train_items)
        ++violations;
    }
  }
  out.require(tested == plan.folds.size(), "every eligible user tested exactly once");
  out.require(violations == 0, std::to_string(violations) + " partition violations");

  const auto data = as_data(std::move(fixture));
  const auto base = fs::temp_directory_path() / "recbench_acceptance";
  fs::remove_all(base);
  write_run_outputs(run_experiment(config, data), base / "a");
  write_run_outputs(run_experiment(config, data), base / "b");
  std::size_t differing = 0;
  for (const auto& entry : fs::directory_iterator(base / "a"))
    differing += slurp(entry.path()) == slurp(base / "b" / entry.path().filename()) ? 0 : 1;
  out.require(differing == 0, std::to_string(differing) + " report files differ between identical runs");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.require(secs < 60.0, "runtime < 60 s");
  fs::remove_all(base);
  out.detail << plan.folds.size() << " test users over " << config.fold_count << " folds, " << violations
             << " violations, reports byte-identical=" << (differing == 0 ? "yes" : "no") << " (" << fmt(secs, 2) << "s)";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"AC1 statistics identities and MovieLens-scale counts", ac1_statistics},
      {"AC2 metric oracle equivalence", ac2_metric_oracles},
      {"AC3 trivial metric bounds", ac3_trivial_bounds},
      {"AC4 recommender oracle equivalence", ac4_recommender_oracles},
      {"AC5 user coverage: CB full, CF starved on sparse data", ac5_user_coverage},
      {"AC6 catalog coverage ordering UPA > SUP > CF", ac6_catalog_coverage},
      {"AC7 precision vs random baseline and CB > CF on sparse data", ac7_precision},
      {"AC8 protocol integrity and run determinism", ac8_protocol_integrity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome out;
    try {
      run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "exception: " << e.what();
    }
    std::printf("[%s] %s: %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.str().c_str());
    failed += out.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
