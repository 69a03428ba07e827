#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace recbench {

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

// Ranked list L_u. Entries are best-first and never longer than target_k.
struct RecommendationList {
  std::string user_id;
  std::vector<ScoredItem> entries;
  std::size_t target_k = 0;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  RecommendationList truncated(std::size_t k) const {
    RecommendationList out{user_id, {}, k};
    const auto n = std::min(k, entries.size());
    out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  bool operator==(const RecommendationList&) const = default;
};

}  // namespace recbench
