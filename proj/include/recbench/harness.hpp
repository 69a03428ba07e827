#pragma once

// Experiment runner: corpus -> splits -> models -> lists -> metrics, across
// folds, attribute selections and list sizes, plus report, plot-data and
// run-archive emission.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "recbench/corpus.hpp"
#include "recbench/error.hpp"
#include "recbench/metrics.hpp"
#include "recbench/recommenders.hpp"
#include "recbench/textproc.hpp"

namespace recbench {

inline constexpr std::string_view kNoSelection = "none";  // selection label of CF runs

struct ExperimentConfig {
  std::string interactions_path;
  FeedbackFormat interactions_format = FeedbackFormat::Explicit;
  std::string content_path;
  std::string stopwords_path;  // empty: built-in English list
  std::vector<std::string> algorithms{"cf", "upa", "sup"};
  std::size_t neighborhood_size = 50;
  CfSimilarity cf_similarity = CfSimilarity::Cosine;
  std::size_t profile_term_budget = 100;
  std::size_t votes_per_item = 50;
  std::vector<std::vector<std::string>> attribute_selections{{std::string(kAllAttributes)}};
  std::vector<std::size_t> k_values{10, 20, 30, 50, 100};
  std::size_t fold_count = 10;
  std::size_t given_n = 10;
  std::size_t min_train_items = 10;
  std::uint64_t rng_seed = 42;

  bool uses_content() const {
    return std::any_of(algorithms.begin(), algorithms.end(), [](const auto& a) { return a == "upa" || a == "sup"; });
  }
  bool uses(std::string_view algorithm) const {
    return std::find(algorithms.begin(), algorithms.end(), algorithm) != algorithms.end();
  }
  std::size_t max_k() const { return k_values.empty() ? 0 : k_values.back(); }
};

// Every problem with the configuration; empty means valid. File existence is
// only checked when check_files is set.
inline std::vector<std::string> config_problems(const ExperimentConfig& c, bool check_files) {
  std::vector<std::string> problems;
  if (c.algorithms.empty()) problems.push_back("algorithms must name at least one of cf, upa, sup");
  std::set<std::string> seen;
  for (const auto& a : c.algorithms) {
    if (a != "cf" && a != "upa" && a != "sup") problems.push_back("unknown algorithm \"" + a + "\"");
    if (!seen.insert(a).second) problems.push_back("algorithm \"" + a + "\" listed twice");
  }
  if (c.k_values.empty()) problems.push_back("k_values must not be empty");
  for (std::size_t i = 0; i < c.k_values.size(); ++i) {
    if (c.k_values[i] == 0) problems.push_back("k_values entries must be >= 1");
    if (i > 0 && c.k_values[i] <= c.k_values[i - 1]) problems.push_back("k_values must be strictly ascending");
  }
  if (c.fold_count == 0) problems.push_back("fold_count must be >= 1");
  if (c.given_n == 0) problems.push_back("given_n must be >= 1");
  if (c.min_train_items == 0) problems.push_back("min_train_items must be >= 1");
  if (c.neighborhood_size == 0) problems.push_back("neighborhood_size must be >= 1");
  if (c.profile_term_budget == 0) problems.push_back("profile_term_budget must be >= 1");
  if (c.votes_per_item == 0) problems.push_back("votes_per_item must be >= 1");
  if (c.uses_content()) {
    if (c.attribute_selections.empty()) problems.push_back("attribute_selections must not be empty for upa/sup");
    for (const auto& sel : c.attribute_selections)
      if (sel.empty()) problems.push_back("attribute selection lists must not be empty");
  }
  if (c.interactions_path.empty()) problems.push_back("interactions_path is required");
  if (c.uses_content() && c.content_path.empty()) problems.push_back("content_path is required for upa/sup");
  if (check_files) {
    namespace fs = std::filesystem;
    auto need = [&](const std::string& path, const char* field) {
      if (!path.empty() && !fs::is_regular_file(path)) problems.push_back(std::string(field) + " not found: " + path);
    };
    need(c.interactions_path, "interactions_path");
    if (c.uses_content()) need(c.content_path, "content_path");
    need(c.stopwords_path, "stopwords_path");
  }
  return problems;
}

// Parses the JSON config. Relative paths resolve against base_dir.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  std::vector<std::string> problems;
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const std::set<std::string> known{
      "interactions_path", "interactions_format", "content_path", "stopwords_path", "algorithms",
      "neighborhood_size", "cf_similarity",       "profile_term_budget", "votes_per_item", "attribute_selections",
      "k_values",          "fold_count",          "given_n",        "min_train_items", "rng_seed"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) problems.push_back("unknown field \"" + key + "\"");

  auto path_field = [&](const char* key, std::string& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) {
      problems.push_back(std::string(key) + " must be a string");
      return;
    }
    std::filesystem::path p = j[key].get<std::string>();
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
    out = p.string();
  };
  auto count_field = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      problems.push_back(std::string(key) + " must be a non-negative integer");
      return;
    }
    out = j[key].get<std::size_t>();
  };

  path_field("interactions_path", c.interactions_path);
  path_field("content_path", c.content_path);
  path_field("stopwords_path", c.stopwords_path);
  if (j.contains("interactions_format")) {
    const auto& f = j["interactions_format"];
    if (f == "explicit")
      c.interactions_format = FeedbackFormat::Explicit;
    else if (f == "implicit")
      c.interactions_format = FeedbackFormat::Implicit;
    else
      problems.push_back("interactions_format must be \"explicit\" or \"implicit\"");
  }
  if (j.contains("algorithms")) {
    const auto& a = j["algorithms"];
    if (!a.is_array() || !std::all_of(a.begin(), a.end(), [](const auto& v) { return v.is_string(); }))
      problems.push_back("algorithms must be an array of strings");
    else
      c.algorithms = a.get<std::vector<std::string>>();
  }
  if (j.contains("cf_similarity")) {
    const auto& s = j["cf_similarity"];
    if (s == "cosine")
      c.cf_similarity = CfSimilarity::Cosine;
    else if (s == "pearson")
      c.cf_similarity = CfSimilarity::Pearson;
    else
      problems.push_back("cf_similarity must be \"cosine\" or \"pearson\"");
  }
  if (j.contains("attribute_selections")) {
    const auto& s = j["attribute_selections"];
    bool ok = s.is_array();
    if (ok)
      for (const auto& sel : s)
        ok = ok && sel.is_array() && std::all_of(sel.begin(), sel.end(), [](const auto& v) { return v.is_string(); });
    if (!ok)
      problems.push_back("attribute_selections must be an array of arrays of attribute names");
    else
      c.attribute_selections = s.get<std::vector<std::vector<std::string>>>();
  }
  if (j.contains("k_values")) {
    const auto& k = j["k_values"];
    if (!k.is_array() || !std::all_of(k.begin(), k.end(), [](const auto& v) { return v.is_number_unsigned(); }))
      problems.push_back("k_values must be an array of positive integers");
    else
      c.k_values = k.get<std::vector<std::size_t>>();
  }
  count_field("neighborhood_size", c.neighborhood_size);
  count_field("profile_term_budget", c.profile_term_budget);
  count_field("votes_per_item", c.votes_per_item);
  count_field("fold_count", c.fold_count);
  count_field("given_n", c.given_n);
  count_field("min_train_items", c.min_train_items);
  if (j.contains("rng_seed")) {
    if (!j["rng_seed"].is_number_integer())
      problems.push_back("rng_seed must be an integer");
    else
      c.rng_seed = j["rng_seed"].get<std::uint64_t>();
  }

  for (auto& p : config_problems(c, false)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path());
}

struct ExperimentData {
  InteractionDataset interactions;
  ContentCorpus content;
  StopwordSet stopwords;
};

inline ExperimentData load_experiment_data(const ExperimentConfig& c) {
  if (auto problems = config_problems(c, true); !problems.empty()) throw ConfigError(std::move(problems));
  ExperimentData data;
  data.interactions = load_interactions(c.interactions_path, c.interactions_format);
  if (c.uses_content()) data.content = load_content(c.content_path);
  data.stopwords = c.stopwords_path.empty() ? default_stopwords() : load_stopwords(c.stopwords_path);
  return data;
}

// fold == nullopt marks a cross-fold aggregate row.
struct ReportRecord {
  std::string algorithm;
  std::string attribute_selection;
  std::optional<std::size_t> fold;
  std::size_t k = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const ReportRecord&) const = default;
};

inline bool record_order(const ReportRecord& a, const ReportRecord& b) {
  const auto fa = a.fold.value_or(SIZE_MAX);
  const auto fb = b.fold.value_or(SIZE_MAX);
  return std::tie(a.algorithm, a.attribute_selection, fa, a.k, a.metric) <
         std::tie(b.algorithm, b.attribute_selection, fb, b.k, b.metric);
}

struct PairSummary {
  std::string algorithm_a;
  std::string algorithm_b;
  std::string attribute_selection;
  std::size_t k = 0;
  double jaccard = 0.0;     // mean over folds
  IntersectionReport hits;  // summed over folds, i.e. over every test user
};

struct RunKey {
  std::string algorithm;
  std::string attribute_selection;
  auto operator<=>(const RunKey&) const = default;
};

struct ExperimentResult {
  std::vector<ReportRecord> records;  // sorted by record_order
  std::vector<PairSummary> pairs;
  std::map<RunKey, ListsByUser> lists;  // top-max(K) lists of every test user
  HiddenByUser hidden;
  std::map<std::string, std::size_t> test_fold;
  DatasetStats stats;
  std::vector<std::string> items_without_content;
  // Per attribute selection: documents whose vector came out empty, so CB never recommends them.
  std::map<std::string, std::vector<std::string>> unrecommendable_items;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn writes only slot i.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline int algorithm_rank(const std::string& a) { return a == "sup" ? 0 : a == "upa" ? 1 : 2; }

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population standard deviation.
inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline bool is_count_metric(const std::string& metric) {
  return metric == "EXCLUSIVE_A" || metric == "EXCLUSIVE_B" || metric == "COMMON";
}

}  // namespace detail

inline std::string pair_label(const std::string& a, const std::string& b) { return a + "_vs_" + b; }

// Runs the full protocol on in-memory data. For every fold the test users'
// lists are generated once at max(K); smaller K are prefixes of those lists.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data, std::size_t threads = 1) {
  if (auto problems = config_problems(config, false); !problems.empty()) throw ConfigError(std::move(problems));
  const auto& ds = data.interactions;
  ExperimentResult result;
  result.stats = compute_stats(ds);
  const std::set<std::string> catalog(ds.items().begin(), ds.items().end());

  // Content indexes do not depend on the split; documents outside the catalog are dropped.
  std::vector<std::pair<std::string, std::shared_ptr<const DocumentIndex>>> indexes;
  if (config.uses_content()) {
    ContentCorpus in_catalog;
    for (const auto& [id, doc] : data.content.documents())
      if (catalog.count(id)) in_catalog.add(doc);
    result.items_without_content = in_catalog.missing_items(ds);
    for (const auto& sel : config.attribute_selections) {
      auto idx = std::make_shared<const DocumentIndex>(build_index(in_catalog, sel, data.stopwords));
      result.unrecommendable_items[selection_label(sel)] = idx->empty_documents();
      indexes.emplace_back(selection_label(sel), std::move(idx));
    }
  }

  const auto plan = plan_splits(ds, config.fold_count, config.given_n, config.min_train_items, config.rng_seed);
  result.test_fold = plan.folds;
  const auto max_k = config.max_k();

  std::vector<RunKey> runs;
  for (const auto& [label, _] : indexes) {
    if (config.uses("sup")) runs.push_back({"sup", label});
    if (config.uses("upa")) runs.push_back({"upa", label});
  }
  if (config.uses("cf")) runs.push_back({"cf", std::string(kNoSelection)});

  // Pairs compared within one attribute selection: sup/upa/cf in that order.
  struct PairSpec {
    RunKey a, b;
    std::string selection;
  };
  std::vector<PairSpec> pair_specs;
  {
    std::vector<std::string> selections;
    for (const auto& [label, _] : indexes) selections.push_back(label);
    if (selections.empty()) selections.push_back(std::string(kNoSelection));
    for (const auto& sel : selections) {
      std::vector<RunKey> group;
      for (const auto& r : runs)
        if (r.attribute_selection == sel || r.algorithm == "cf") group.push_back(r);
      std::sort(group.begin(), group.end(), [](const RunKey& x, const RunKey& y) {
        return detail::algorithm_rank(x.algorithm) < detail::algorithm_rank(y.algorithm);
      });
      for (std::size_t i = 0; i < group.size(); ++i)
        for (std::size_t j = i + 1; j < group.size(); ++j) pair_specs.push_back({group[i], group[j], sel});
    }
  }

  std::map<std::tuple<std::string, std::string, std::size_t>, IntersectionReport> pair_hits;
  for (std::size_t fold = 0; fold < config.fold_count; ++fold) {
    try {
      const auto split = materialize_split(ds, plan, fold);
      const auto test_users = plan.users_in_fold(fold);
      std::vector<UserProfile> profiles;
      profiles.reserve(test_users.size());
      for (const auto& u : test_users) profiles.push_back(profile_of(split.train, u));

      std::optional<CFModel> cf;
      if (config.uses("cf")) cf.emplace(fit_cf(split.train, config.neighborhood_size, config.cf_similarity));

      std::map<RunKey, ListsByUser> fold_lists;
      for (const auto& run : runs) {
        std::optional<AnyModel> model;
        if (run.algorithm == "cf") {
          model.emplace(*cf);
        } else {
          const auto& index = std::find_if(indexes.begin(), indexes.end(), [&](const auto& p) {
                                return p.first == run.attribute_selection;
                              })->second;
          if (run.algorithm == "upa")
            model.emplace(fit_upa(index, config.profile_term_budget));
          else
            model.emplace(fit_sup(index, config.votes_per_item));
        }
        std::vector<RecommendationList> generated(profiles.size());
        detail::parallel_for(profiles.size(), threads,
                             [&](std::size_t i) { generated[i] = recommend(*model, profiles[i], max_k); });
        auto& lists = fold_lists[run];
        for (auto& l : generated) lists.emplace(l.user_id, std::move(l));
      }

      for (const auto& k : config.k_values) {
        for (const auto& run : runs) {
          EvalInput in{{}, split.hidden, catalog, k};
          for (const auto& [u, l] : fold_lists[run]) in.lists.emplace(u, l.truncated(k));
          const auto m = evaluate(in);
          for (const auto& [metric, value] : {std::pair{"MAP", m.map_at_k}, std::pair{"UCOV", m.ucov_at_k},
                                              std::pair{"CCOV", m.ccov_at_k}, std::pair{"MAP_SERVED", m.map_served_at_k}})
            result.records.push_back({run.algorithm, run.attribute_selection, fold, k, metric, value});
        }
        for (const auto& p : pair_specs) {
          const auto& la = fold_lists[p.a];
          const auto& lb = fold_lists[p.b];
          const auto label = pair_label(p.a.algorithm, p.b.algorithm);
          const double jac = jaccard_list_similarity(la, lb, k);
          const auto hits = hit_intersection(la, lb, split.hidden, k);
          pair_hits[{label, p.selection, k}] += hits;
          result.records.push_back({label, p.selection, fold, k, "JACCARD", jac});
          result.records.push_back({label, p.selection, fold, k, "EXCLUSIVE_A", static_cast<double>(hits.exclusive_a)});
          result.records.push_back({label, p.selection, fold, k, "EXCLUSIVE_B", static_cast<double>(hits.exclusive_b)});
          result.records.push_back({label, p.selection, fold, k, "COMMON", static_cast<double>(hits.common)});
        }
      }

      for (auto& [run, lists] : fold_lists) {
        auto& all = result.lists[run];
        for (auto& [u, l] : lists) all.emplace(u, std::move(l));
      }
      for (const auto& [u, h] : split.hidden) result.hidden.emplace(u, h);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(fold) + " failed: " + e.what());
    }
  }

  // Cross-fold aggregates: mean and std for rates, totals for hit counts.
  std::map<std::tuple<std::string, std::string, std::size_t, std::string>, std::vector<double>> per_fold;
  for (const auto& r : result.records) per_fold[{r.algorithm, r.attribute_selection, r.k, r.metric}].push_back(r.value);
  for (const auto& [key, values] : per_fold) {
    const auto& [alg, sel, k, metric] = key;
    if (detail::is_count_metric(metric)) {
      double total = 0.0;
      for (const double v : values) total += v;
      result.records.push_back({alg, sel, std::nullopt, k, metric, total});
    } else {
      result.records.push_back({alg, sel, std::nullopt, k, metric, detail::mean_of(values)});
      result.records.push_back({alg, sel, std::nullopt, k, metric + "_STD", detail::std_of(values)});
    }
  }
  std::sort(result.records.begin(), result.records.end(), record_order);

  for (const auto& p : pair_specs) {
    const auto label = pair_label(p.a.algorithm, p.b.algorithm);
    for (const auto k : config.k_values) {
      PairSummary s{p.a.algorithm, p.b.algorithm, p.selection, k, 0.0, pair_hits[{label, p.selection, k}]};
      s.jaccard = detail::mean_of(per_fold[{label, p.selection, k, "JACCARD"}]);
      result.pairs.push_back(s);
    }
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads = 1) {
  return run_experiment(config, load_experiment_data(config), threads);
}

// ---------------------------------------------------------------------------
// Emission

enum class ReportFormat { Csv, Json };

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const ReportRecord& r) {
  return {{"algorithm", r.algorithm},
          {"attribute_selection", r.attribute_selection},
          {"fold", r.fold ? nlohmann::json(*r.fold) : nlohmann::json(nullptr)},
          {"k", r.k},
          {"metric", r.metric},
          {"value", r.value}};
}

inline ReportRecord record_from_json(const nlohmann::json& j) {
  ReportRecord r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.attribute_selection = j.at("attribute_selection").get<std::string>();
  if (!j.at("fold").is_null()) r.fold = j.at("fold").get<std::size_t>();
  r.k = j.at("k").get<std::size_t>();
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  return r;
}

// CSV columns: algorithm,attribute_selection,fold,k,metric,value (fold "all"
// on aggregate rows). JSON: array of record objects, fold null on aggregates.
inline void emit_report(std::vector<ReportRecord> records, const std::filesystem::path& path, ReportFormat format) {
  if (records.empty()) throw Error("no records to emit");
  std::sort(records.begin(), records.end(), record_order);
  auto out = detail::open_for_write(path);
  if (format == ReportFormat::Csv) {
    out << "algorithm,attribute_selection,fold,k,metric,value\n";
    for (const auto& r : records)
      out << detail::csv_field(r.algorithm) << ',' << detail::csv_field(r.attribute_selection) << ','
          << (r.fold ? std::to_string(*r.fold) : std::string("all")) << ',' << r.k << ',' << detail::csv_field(r.metric)
          << ',' << detail::format_real(r.value) << '\n';
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    out << arr.dump(2) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<ReportRecord> load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const auto arr = nlohmann::json::parse(in);
  std::vector<ReportRecord> out;
  for (const auto& j : arr) out.push_back(record_from_json(j));
  return out;
}

// One CSV block per (algorithm, selection, metric): K against the cross-fold
// mean of the per-fold records. `metrics` filters which metrics to emit.
inline void emit_plot_data(const std::vector<ReportRecord>& records, const std::filesystem::path& path,
                           const std::set<std::string>& metrics = {"MAP", "UCOV", "CCOV", "JACCARD", "EXCLUSIVE_A",
                                                                   "EXCLUSIVE_B", "COMMON"}) {
  if (metrics.empty()) throw Error("no metrics selected for plot data");
  using SeriesKey = std::tuple<std::string, std::string, std::string>;
  std::map<SeriesKey, std::map<std::size_t, std::vector<double>>> series;
  for (const auto& r : records)
    if (r.fold && metrics.count(r.metric)) series[{r.algorithm, r.attribute_selection, r.metric}][r.k].push_back(r.value);
  if (series.empty()) throw Error("no per-fold records match the selected metrics");
  std::set<std::size_t> ks;
  for (const auto& [_, points] : series)
    for (const auto& [k, __] : points) ks.insert(k);
  if (ks.size() < 2) throw Error("plot data needs records for at least two K values");

  auto out = detail::open_for_write(path);
  bool first = true;
  for (const auto& [key, points] : series) {
    const auto& [alg, sel, metric] = key;
    if (!first) out << '\n';
    first = false;
    out << "# series algorithm=" << alg << " attribute_selection=" << sel << " metric=" << metric << '\n';
    out << "k,value\n";
    for (const auto& [k, values] : points) out << k << ',' << detail::format_real(detail::mean_of(values)) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Run archives (input of `compare`)

struct RunArchive {
  std::map<RunKey, ListsByUser> lists;
  HiddenByUser hidden;
};

inline void write_run_archive(const ExperimentResult& result, const std::filesystem::path& dir) {
  {
    auto out = detail::open_for_write(dir / "lists.jsonl");
    for (const auto& [key, lists] : result.lists) {
      for (const auto& [user, list] : lists) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& e : list.entries) items.push_back({{"item_id", e.item_id}, {"score", e.score}});
        nlohmann::json line{{"algorithm", key.algorithm},
                            {"attribute_selection", key.attribute_selection},
                            {"fold", result.test_fold.at(user)},
                            {"user_id", user},
                            {"target_k", list.target_k},
                            {"items", items}};
        out << line.dump() << '\n';
      }
    }
  }
  auto out = detail::open_for_write(dir / "hidden.jsonl");
  for (const auto& [user, items] : result.hidden) {
    nlohmann::json line{{"fold", result.test_fold.at(user)}, {"user_id", user}, {"hidden", items}};
    out << line.dump() << '\n';
  }
}

inline RunArchive load_run_archive(const std::filesystem::path& dir) {
  RunArchive archive;
  auto read_lines = [&](const std::filesystem::path& path, auto&& handle) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        handle(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, path.string() + ": " + e.what());
      }
    }
  };
  read_lines(dir / "lists.jsonl", [&](const nlohmann::json& j) {
    RecommendationList list{j.at("user_id").get<std::string>(), {}, j.at("target_k").get<std::size_t>()};
    for (const auto& e : j.at("items")) list.entries.push_back({e.at("item_id").get<std::string>(), e.at("score").get<double>()});
    auto& lists = archive.lists[{j.at("algorithm").get<std::string>(), j.at("attribute_selection").get<std::string>()}];
    lists.emplace(list.user_id, std::move(list));
  });
  read_lines(dir / "hidden.jsonl", [&](const nlohmann::json& j) {
    archive.hidden.emplace(j.at("user_id").get<std::string>(), j.at("hidden").get<std::set<std::string>>());
  });
  return archive;
}

// Writes records.csv, records.json, plot_data.csv (when >= 2 K values),
// stats.json and the list/hidden archive into `dir`.
inline void write_run_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  emit_report(result.records, dir / "records.csv", ReportFormat::Csv);
  emit_report(result.records, dir / "records.json", ReportFormat::Json);
  std::set<std::size_t> ks;
  for (const auto& r : result.records) ks.insert(r.k);
  if (ks.size() >= 2) emit_plot_data(result.records, dir / "plot_data.csv");
  {
    const auto& s = result.stats;
    nlohmann::json j{{"n_users", s.n_users},
                     {"n_items", s.n_items},
                     {"n_activities", s.n_activities},
                     {"items_per_user_ratio", s.items_per_user_ratio},
                     {"avg_items_per_user", s.avg_items_per_user},
                     {"avg_users_per_item", s.avg_users_per_item},
                     {"max_items_per_user", s.max_items_per_user},
                     {"min_items_per_user", s.min_items_per_user},
                     {"max_users_per_item", s.max_users_per_item},
                     {"min_users_per_item", s.min_users_per_item},
                     {"sparsity", s.sparsity},
                     {"test_users", result.test_fold.size()},
                     {"items_without_content", result.items_without_content.size()}};
    auto& empty = j["unrecommendable_items"] = nlohmann::json::object();
    for (const auto& [sel, ids] : result.unrecommendable_items) empty[sel] = ids.size();
    auto out = detail::open_for_write(dir / "stats.json");
    out << j.dump(2) << '\n';
  }
  write_run_archive(result, dir);
}

struct CompareRow {
  RunKey a;
  RunKey b;
  std::size_t k = 0;
  std::size_t common_users = 0;
  double jaccard = 0.0;
  IntersectionReport hits;
};

// Every run of archive A against every run of archive B, over their common
// test users. Hidden sets of common users must agree.
inline std::vector<CompareRow> compare_runs(const RunArchive& a, const RunArchive& b, std::size_t k) {
  if (k == 0) throw ConfigError("k must be >= 1");
  for (const auto& [user, items] : a.hidden) {
    const auto it = b.hidden.find(user);
    if (it != b.hidden.end() && it->second != items)
      throw ConfigError("run archives disagree on the hidden items of user " + user +
                        " (different data or seed)");
  }
  std::vector<CompareRow> rows;
  for (const auto& [key_a, lists_a] : a.lists) {
    for (const auto& [key_b, lists_b] : b.lists) {
      ListsByUser ca, cb;
      for (const auto& [u, l] : lists_a)
        if (const auto it = lists_b.find(u); it != lists_b.end() && a.hidden.count(u)) {
          ca.emplace(u, l);
          cb.emplace(u, it->second);
        }
      if (ca.empty()) continue;
      CompareRow row{key_a, key_b, k, ca.size(), jaccard_list_similarity(ca, cb, k), hit_intersection(ca, cb, a.hidden, k)};
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw ConfigError("run archives share no test users");
  return rows;
}

}  // namespace recbench
