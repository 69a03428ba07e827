#pragma once

// Top-N list metrics: MAP@K, user coverage (UCOV@K), catalog coverage
// (CCOV@K), per-user Jaccard overlap between two algorithms' lists, and the
// split of true-positive hits into A-only, B-only and shared.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "recbench/error.hpp"
#include "recbench/types.hpp"

namespace recbench {

using ListsByUser = std::map<std::string, RecommendationList>;
using HiddenByUser = std::map<std::string, std::set<std::string>>;

// The active users are exactly the keys of `hidden`; an active user without a
// list is treated as having received an empty one.
struct EvalInput {
  ListsByUser lists;
  HiddenByUser hidden;
  std::set<std::string> catalog;
  std::size_t k = 10;
};

struct MetricReport {
  double map_at_k = 0.0;
  double ucov_at_k = 0.0;
  double ccov_at_k = 0.0;
  // Mean AP over users that received at least one item (0 when none did).
  double map_served_at_k = 0.0;
  std::map<std::string, double> per_user_ap;
};

struct IntersectionReport {
  std::size_t exclusive_a = 0;
  std::size_t exclusive_b = 0;
  std::size_t common = 0;

  IntersectionReport& operator+=(const IntersectionReport& o) {
    exclusive_a += o.exclusive_a;
    exclusive_b += o.exclusive_b;
    common += o.common;
    return *this;
  }
  bool operator==(const IntersectionReport&) const = default;
};

// AP@K = 1/min(|H|, K) * sum over ranks r <= K of [L[r] in H] * hits(<= r) / r.
inline double average_precision_at_k(const RecommendationList& list, const std::set<std::string>& hidden,
                                     std::size_t k) {
  if (k == 0) throw UndefinedMetricError("K must be >= 1");
  if (hidden.empty()) throw UndefinedMetricError("average precision of user " + list.user_id + " with no hidden items");
  const auto depth = std::min(k, list.entries.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (hidden.count(list.entries[r].item_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(std::min(hidden.size(), k));
}

namespace detail {

inline void validate(const EvalInput& in) {
  if (in.k == 0) throw UndefinedMetricError("K must be >= 1");
  for (const auto& [user, _] : in.lists)
    if (!in.hidden.count(user)) throw UndefinedMetricError("user " + user + " has a list but no hidden set");
}

inline const RecommendationList& list_or_empty(const ListsByUser& lists, const std::string& user) {
  static const RecommendationList empty{};
  const auto it = lists.find(user);
  return it == lists.end() ? empty : it->second;
}

}  // namespace detail

inline double map_at_k(const EvalInput& in) {
  detail::validate(in);
  if (in.hidden.empty()) throw UndefinedMetricError("MAP needs at least one active user");
  double sum = 0.0;
  for (const auto& [user, hidden] : in.hidden)
    sum += average_precision_at_k(detail::list_or_empty(in.lists, user), hidden, in.k);
  return sum / static_cast<double>(in.hidden.size());
}

inline double ucov_at_k(const EvalInput& in) {
  detail::validate(in);
  if (in.hidden.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [user, _] : in.hidden) {
    const auto len = std::min(detail::list_or_empty(in.lists, user).size(), in.k);
    sum += static_cast<double>(len) / static_cast<double>(in.k);
  }
  return sum / static_cast<double>(in.hidden.size());
}

inline double ccov_at_k(const EvalInput& in) {
  detail::validate(in);
  if (in.catalog.empty()) throw UndefinedMetricError("catalog coverage needs a non-empty catalog");
  std::set<std::string> seen;
  for (const auto& [user, _] : in.hidden) {
    const auto& list = detail::list_or_empty(in.lists, user);
    const auto depth = std::min(in.k, list.size());
    for (std::size_t r = 0; r < depth; ++r) seen.insert(list.entries[r].item_id);
  }
  return static_cast<double>(seen.size()) / static_cast<double>(in.catalog.size());
}

inline MetricReport evaluate(const EvalInput& in) {
  MetricReport report;
  std::size_t served = 0;
  double served_sum = 0.0;
  for (const auto& [user, hidden] : in.hidden) {
    const auto& list = detail::list_or_empty(in.lists, user);
    const double ap = average_precision_at_k(list, hidden, in.k);
    report.per_user_ap.emplace(user, ap);
    if (!list.empty()) {
      ++served;
      served_sum += ap;
    }
  }
  report.map_at_k = map_at_k(in);
  report.ucov_at_k = ucov_at_k(in);
  report.ccov_at_k = ccov_at_k(in);
  report.map_served_at_k = served ? served_sum / static_cast<double>(served) : 0.0;
  return report;
}

namespace detail {

inline std::set<std::string> top_items(const RecommendationList& list, std::size_t k) {
  std::set<std::string> out;
  const auto depth = std::min(k, list.size());
  for (std::size_t r = 0; r < depth; ++r) out.insert(list.entries[r].item_id);
  return out;
}

}  // namespace detail

// Mean over users present in both collections of |A ∩ B| / |A ∪ B| on the
// top-k item sets. Two empty lists count as 0.
inline double jaccard_list_similarity(const ListsByUser& lists_a, const ListsByUser& lists_b, std::size_t k) {
  if (k == 0) throw UndefinedMetricError("K must be >= 1");
  std::size_t common_users = 0;
  double sum = 0.0;
  for (const auto& [user, la] : lists_a) {
    const auto it = lists_b.find(user);
    if (it == lists_b.end()) continue;
    ++common_users;
    const auto a = detail::top_items(la, k);
    const auto b = detail::top_items(it->second, k);
    std::size_t inter = 0;
    for (const auto& i : a) inter += b.count(i);
    const auto uni = a.size() + b.size() - inter;
    if (uni > 0) sum += static_cast<double>(inter) / static_cast<double>(uni);
  }
  if (common_users == 0) throw UndefinedMetricError("no user has lists from both algorithms");
  return sum / static_cast<double>(common_users);
}

inline IntersectionReport hit_intersection(const ListsByUser& lists_a, const ListsByUser& lists_b,
                                           const HiddenByUser& hidden, std::size_t k) {
  if (k == 0) throw UndefinedMetricError("K must be >= 1");
  std::set<std::string> users_a, users_b;
  for (const auto& [u, _] : lists_a) users_a.insert(u);
  for (const auto& [u, _] : lists_b) users_b.insert(u);
  if (users_a != users_b) throw UndefinedMetricError("hit intersection needs the same users in both collections");

  IntersectionReport report;
  for (const auto& [user, la] : lists_a) {
    const auto h = hidden.find(user);
    if (h == hidden.end()) throw UndefinedMetricError("user " + user + " has no hidden set");
    const auto a = detail::top_items(la, k);
    const auto b = detail::top_items(lists_b.at(user), k);
    for (const auto& item : h->second) {
      const bool in_a = a.count(item) != 0;
      const bool in_b = b.count(item) != 0;
      if (in_a && in_b)
        ++report.common;
      else if (in_a)
        ++report.exclusive_a;
      else if (in_b)
        ++report.exclusive_b;
    }
  }
  return report;
}

}  // namespace recbench
