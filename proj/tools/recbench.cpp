// recbench: dataset statistics, offline experiments and run comparison.
//
//   recbench stats --interactions F [--implicit] [--json]
//   recbench run --config C --out DIR [--threads N]
//   recbench compare --run-a DIR --run-b DIR --k K
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "recbench/recbench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

void print_stats(const recbench::DatasetStats& s, bool as_json) {
  if (as_json) {
    nlohmann::json j{{"n_users", s.n_users},
                     {"n_items", s.n_items},
                     {"n_activities", s.n_activities},
                     {"items_per_user_ratio", s.items_per_user_ratio},
                     {"avg_items_per_user", s.avg_items_per_user},
                     {"avg_users_per_item", s.avg_users_per_item},
                     {"max_items_per_user", s.max_items_per_user},
                     {"max_users_per_item", s.max_users_per_item},
                     {"min_items_per_user", s.min_items_per_user},
                     {"min_users_per_item", s.min_users_per_item},
                     {"sparsity", s.sparsity}};
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::printf("%-22s %12zu\n", "#users", s.n_users);
  std::printf("%-22s %12zu\n", "#items", s.n_items);
  std::printf("%-22s %12zu\n", "#activities", s.n_activities);
  std::printf("%-22s %12.4f\n", "#items / #users", s.items_per_user_ratio);
  std::printf("%-22s %12.4f\n", "avg #items by user", s.avg_items_per_user);
  std::printf("%-22s %12.4f\n", "avg #users by item", s.avg_users_per_item);
  std::printf("%-22s %12zu\n", "max #items by user", s.max_items_per_user);
  std::printf("%-22s %12zu\n", "max #users by item", s.max_users_per_item);
  std::printf("%-22s %12zu\n", "min #items by user", s.min_items_per_user);
  std::printf("%-22s %12zu\n", "min #users by item", s.min_users_per_item);
  std::printf("%-22s %12.4f\n", "sparsity user x item", s.sparsity);
}

void print_summary(const recbench::ExperimentResult& result) {
  std::printf("%-12s %-24s %6s %10s %10s %10s\n", "algorithm", "selection", "K", "MAP", "UCOV", "CCOV");
  std::map<std::tuple<std::string, std::string, std::size_t>, std::map<std::string, double>> rows;
  for (const auto& r : result.records)
    if (!r.fold && (r.metric == "MAP" || r.metric == "UCOV" || r.metric == "CCOV"))
      rows[{r.algorithm, r.attribute_selection, r.k}][r.metric] = r.value;
  for (const auto& [key, m] : rows) {
    const auto& [alg, sel, k] = key;
    std::printf("%-12s %-24s %6zu %10.4f %10.4f %10.4f\n", alg.c_str(), sel.c_str(), k, m.at("MAP"), m.at("UCOV"),
                m.at("CCOV"));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline evaluation of collaborative and content-based recommenders"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "Print dataset statistics");
  std::string interactions;
  bool implicit = false;
  bool stats_json = false;
  stats->add_option("--interactions", interactions, "Interactions TSV file")->required();
  stats->add_flag("--implicit", implicit, "Rows carry no rating (implicit feedback)");
  stats->add_flag("--json", stats_json, "Print as JSON");

  auto* run = app.add_subcommand("run", "Run a full cross-validated experiment");
  std::string config_path;
  std::string out_dir;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--threads", threads, "Worker threads for list generation")->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand("compare", "Jaccard similarity and hit intersection between two runs");
  std::string run_a, run_b;
  std::size_t k = 10;
  compare->add_option("--run-a", run_a, "Output directory of the first run")->required();
  compare->add_option("--run-b", run_b, "Output directory of the second run")->required();
  compare->add_option("--k", k, "List size")->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*stats) {
      const auto ds = recbench::load_interactions(
          interactions, implicit ? recbench::FeedbackFormat::Implicit : recbench::FeedbackFormat::Explicit);
      print_stats(recbench::compute_stats(ds), stats_json);
    } else if (*run) {
      const auto config = recbench::load_config(config_path);
      const auto result = recbench::run_experiment(config, threads);
      recbench::write_run_outputs(result, out_dir);
      if (!result.items_without_content.empty())
        std::cerr << "note: " << result.items_without_content.size() << " catalog items have no content document\n";
      for (const auto& [sel, ids] : result.unrecommendable_items)
        if (!ids.empty()) std::cerr << "note: " << ids.size() << " items have no usable terms under " << sel << '\n';
      print_summary(result);
    } else if (*compare) {
      const auto rows = recbench::compare_runs(recbench::load_run_archive(run_a), recbench::load_run_archive(run_b), k);
      std::cout << "algorithm_a,attribute_selection_a,algorithm_b,attribute_selection_b,k,common_users,jaccard,"
                   "exclusive_a,exclusive_b,common\n";
      for (const auto& r : rows)
        std::cout << r.a.algorithm << ',' << r.a.attribute_selection << ',' << r.b.algorithm << ','
                  << r.b.attribute_selection << ',' << r.k << ',' << r.common_users << ','
                  << recbench::detail::format_real(r.jaccard) << ',' << r.hits.exclusive_a << ','
                  << r.hits.exclusive_b << ',' << r.hits.common << '\n';
    }
  } catch (const recbench::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const recbench::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
