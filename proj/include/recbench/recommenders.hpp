#pragma once

// The three memory-based recommenders behind one recommend(model, user, k)
// contract:
//   * user-based kNN collaborative filtering (cosine or Pearson),
//   * User Profile Aggregation (UPA): the user's strongest aggregated TF-IDF
//     terms become a query that is matched against every item,
//   * Similarity of User Profile (SUP): every profile item votes for its most
//     similar items, weighted by similarity.
//
// All rankings break ties by ascending item_id, so output is a pure function
// of (model, profile, k). Fitted models are immutable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "recbench/corpus.hpp"
#include "recbench/error.hpp"
#include "recbench/textproc.hpp"
#include "recbench/types.hpp"

namespace recbench {

struct ProfileItem {
  std::string item_id;
  std::optional<double> rating;
};

struct UserProfile {
  std::string user_id;
  std::vector<ProfileItem> items;
};

inline UserProfile profile_of(const InteractionDataset& train, std::string_view user_id) {
  UserProfile p{std::string(user_id), {}};
  for (const auto& r : train.profile(user_id)) p.items.push_back({r.item_id, r.rating});
  return p;
}

namespace detail {

inline bool scored_before(const ScoredItem& a, const ScoredItem& b) {
  return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
}

inline void rank_and_truncate(std::vector<ScoredItem>& items, std::size_t k) {
  const auto keep = std::min(k, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(keep), items.end(), scored_before);
  items.resize(keep);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Collaborative filtering

enum class CfSimilarity { Cosine, Pearson };

class CFModel {
 public:
  struct Cell {
    std::uint32_t index;
    double rating;
  };
  struct Neighbor {
    std::string user_id;
    double similarity;
  };

  CFModel(const InteractionDataset& train, std::size_t neighborhood_size, CfSimilarity similarity)
      : users_(train.users()),
        items_(train.items()),
        neighborhood_size_(neighborhood_size),
        similarity_(similarity) {
    rows_.resize(users_.size());
    cols_.resize(items_.size());
    for (std::size_t u = 0; u < users_.size(); ++u) {
      for (const auto& r : train.profile(u)) {
        const auto i = static_cast<std::uint32_t>(*train.item_index(r.item_id));
        const double rating = r.rating.value_or(1.0);
        rows_[u].push_back({i, rating});
        cols_[i].push_back({static_cast<std::uint32_t>(u), rating});
      }
    }
    means_.resize(users_.size(), 0.0);
    norms_.resize(users_.size(), 0.0);
    for (std::size_t u = 0; u < users_.size(); ++u) {
      double sum = 0.0, sq = 0.0;
      for (const auto& c : rows_[u]) {
        sum += c.rating;
        sq += c.rating * c.rating;
      }
      if (!rows_[u].empty()) means_[u] = sum / static_cast<double>(rows_[u].size());
      norms_[u] = std::sqrt(sq);
    }
  }

  std::size_t neighborhood_size() const noexcept { return neighborhood_size_; }
  CfSimilarity similarity_kind() const noexcept { return similarity_; }
  bool has_user(std::string_view user_id) const { return find(users_, user_id).has_value(); }

  // Similarity between two users of the training matrix.
  double similarity(std::string_view a, std::string_view b) const {
    const auto ua = find(users_, a);
    const auto ub = find(users_, b);
    if (!ua || !ub) throw ColdStartError("unknown user in similarity query");
    const auto sims = similarities(rows_[*ua], means_[*ua], norms_[*ua]);
    const auto it = sims.find(static_cast<std::uint32_t>(*ub));
    return it == sims.end() ? 0.0 : it->second;
  }

  // Top neighbors of the profile's owner (positive similarity only), best first.
  std::vector<Neighbor> neighbors(const UserProfile& user) const {
    const auto self = require_user(user.user_id);
    const auto row = query_row(user);
    double sum = 0.0, sq = 0.0;
    for (const auto& c : row) {
      sum += c.rating;
      sq += c.rating * c.rating;
    }
    const double mean = row.empty() ? 0.0 : sum / static_cast<double>(row.size());
    std::vector<std::pair<std::uint32_t, double>> ranked;
    for (const auto& [v, s] : similarities(row, mean, std::sqrt(sq)))
      if (v != self && s > 0.0) ranked.emplace_back(v, s);
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
    if (ranked.size() > neighborhood_size_) ranked.resize(neighborhood_size_);
    std::vector<Neighbor> out;
    out.reserve(ranked.size());
    for (const auto& [v, s] : ranked) out.push_back({users_[v], s});
    return out;
  }

  std::vector<ScoredItem> score_candidates(const UserProfile& user) const {
    std::set<std::string> own;
    for (const auto& p : user.items) own.insert(p.item_id);
    std::map<std::uint32_t, double> scores;
    for (const auto& n : neighbors(user)) {
      const auto v = *find(users_, n.user_id);
      for (const auto& c : rows_[v])
        if (!own.count(items_[c.index])) scores[c.index] += n.similarity * c.rating;
    }
    std::vector<ScoredItem> out;
    out.reserve(scores.size());
    for (const auto& [i, s] : scores) out.push_back({items_[i], s});
    return out;
  }

 private:
  static std::optional<std::size_t> find(const std::vector<std::string>& sorted, std::string_view key) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), key,
                                     [](const std::string& a, std::string_view b) { return a < b; });
    if (it == sorted.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - sorted.begin());
  }

  std::uint32_t require_user(std::string_view user_id) const {
    const auto u = find(users_, user_id);
    if (!u) throw ColdStartError("user " + std::string(user_id) + " is not in the training matrix");
    return static_cast<std::uint32_t>(*u);
  }

  std::vector<Cell> query_row(const UserProfile& user) const {
    std::vector<Cell> row;
    for (const auto& p : user.items)
      if (const auto i = find(items_, p.item_id)) row.push_back({static_cast<std::uint32_t>(*i), p.rating.value_or(1.0)});
    std::sort(row.begin(), row.end(), [](const Cell& a, const Cell& b) { return a.index < b.index; });
    row.erase(std::unique(row.begin(), row.end(), [](const Cell& a, const Cell& b) { return a.index == b.index; }),
              row.end());
    return row;
  }

  // Similarity of `row` to every user sharing at least one item with it.
  std::map<std::uint32_t, double> similarities(const std::vector<Cell>& row, double mean, double norm) const {
    std::map<std::uint32_t, double> out;
    if (similarity_ == CfSimilarity::Cosine) {
      if (norm == 0.0) return out;
      std::map<std::uint32_t, double> dots;
      for (const auto& c : row)
        for (const auto& rater : cols_[c.index]) dots[rater.index] += c.rating * rater.rating;
      for (const auto& [v, d] : dots)
        if (norms_[v] > 0.0) out[v] = std::clamp(d / (norm * norms_[v]), 0.0, 1.0);
      return out;
    }
    struct Acc {
      double cross = 0.0, self_sq = 0.0, other_sq = 0.0;
    };
    std::map<std::uint32_t, Acc> acc;
    for (const auto& c : row) {
      const double du = c.rating - mean;
      for (const auto& rater : cols_[c.index]) {
        const double dv = rater.rating - means_[rater.index];
        auto& a = acc[rater.index];
        a.cross += du * dv;
        a.self_sq += du * du;
        a.other_sq += dv * dv;
      }
    }
    for (const auto& [v, a] : acc) {
      const double den = std::sqrt(a.self_sq * a.other_sq);
      out[v] = den > 0.0 ? std::clamp(a.cross / den, -1.0, 1.0) : 0.0;
    }
    return out;
  }

  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<std::vector<Cell>> cols_;
  std::vector<double> means_;
  std::vector<double> norms_;
  std::size_t neighborhood_size_;
  CfSimilarity similarity_;
};

inline CFModel fit_cf(const InteractionDataset& train, std::size_t neighborhood_size = 50,
                      CfSimilarity similarity = CfSimilarity::Cosine) {
  if (train.empty()) throw EmptyDatasetError("cannot fit CF on an empty training set");
  if (neighborhood_size == 0) throw ConfigError("neighborhood_size must be >= 1");
  return CFModel(train, neighborhood_size, similarity);
}

// Candidates are the neighbors' items the user has not seen, scored by
// sum(sim(u, v) * r(v, i)). Lists may be shorter than k.
inline RecommendationList recommend_cf(const CFModel& model, const UserProfile& user, std::size_t k) {
  auto scored = model.score_candidates(user);
  detail::rank_and_truncate(scored, k);
  return {user.user_id, std::move(scored), k};
}

// ---------------------------------------------------------------------------
// Content-based

namespace detail {

// Profile items that have a non-empty vector, as sorted unique doc indices.
inline std::vector<std::size_t> content_voters(const DocumentIndex& index, const UserProfile& user) {
  std::vector<std::size_t> docs;
  for (const auto& p : user.items)
    if (const auto d = index.find(p.item_id); d && !index.vector(*d).empty()) docs.push_back(*d);
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  return docs;
}

inline std::vector<char> profile_mask(const DocumentIndex& index, const UserProfile& user) {
  std::vector<char> mask(index.size(), 0);
  for (const auto& p : user.items)
    if (const auto d = index.find(p.item_id)) mask[*d] = 1;
  return mask;
}

}  // namespace detail

struct UPAModel {
  std::shared_ptr<const DocumentIndex> index;
  std::size_t profile_term_budget = 100;
};

inline UPAModel fit_upa(std::shared_ptr<const DocumentIndex> index, std::size_t profile_term_budget = 100) {
  if (!index) throw ConfigError("UPA needs a document index");
  if (profile_term_budget == 0) throw ConfigError("profile_term_budget must be >= 1");
  return {std::move(index), profile_term_budget};
}

// Sum of the profile vectors, cut to the budget's strongest terms. Term ids are
// ordered like the term strings, so the id tie-break is the string tie-break.
inline SparseVector upa_query(const UPAModel& model, const UserProfile& user) {
  const auto& index = *model.index;
  std::map<TermId, double> sums;
  for (const auto d : detail::content_voters(index, user))
    for (const auto& [t, w] : index.vector(d).entries()) sums[t] += w;
  std::vector<SparseVector::Entry> terms(sums.begin(), sums.end());
  const auto keep = std::min(model.profile_term_budget, terms.size());
  std::partial_sort(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(keep), terms.end(),
                    [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  terms.resize(keep);
  return SparseVector(std::move(terms));
}

inline RecommendationList recommend_upa(const UPAModel& model, const UserProfile& user, std::size_t k) {
  RecommendationList list{user.user_id, {}, k};
  const auto query = upa_query(model, user);
  if (query.empty()) return list;
  const auto mask = detail::profile_mask(*model.index, user);
  for (const auto& r : detail::top_k_docs(*model.index, query, k, &mask))
    list.entries.push_back({model.index->item_id(r.doc), r.score});
  return list;
}

struct SUPModel {
  std::shared_ptr<const DocumentIndex> index;
  std::size_t votes_per_item = 50;
};

inline SUPModel fit_sup(std::shared_ptr<const DocumentIndex> index, std::size_t votes_per_item = 50) {
  if (!index) throw ConfigError("SUP needs a document index");
  if (votes_per_item == 0) throw ConfigError("votes_per_item must be >= 1");
  return {std::move(index), votes_per_item};
}

// Adds up similarity-weighted votes. Ballots are tallied in the order given;
// candidates are ranked by total weight, ties by ascending item_id.
inline std::vector<ScoredItem> tally_votes(const std::vector<std::vector<ScoredItem>>& ballots, std::size_t k) {
  std::map<std::string, double> totals;
  for (const auto& ballot : ballots)
    for (const auto& vote : ballot) totals[vote.item_id] += vote.score;
  std::vector<ScoredItem> ranked;
  ranked.reserve(totals.size());
  for (const auto& [id, s] : totals) ranked.push_back({id, s});
  detail::rank_and_truncate(ranked, k);
  return ranked;
}

// Each voter nominates its votes_per_item most similar items outside the
// profile. Voters are processed in item_id order so the result does not
// depend on profile order.
inline RecommendationList recommend_sup(const SUPModel& model, const UserProfile& user, std::size_t k) {
  const auto& index = *model.index;
  const auto mask = detail::profile_mask(index, user);
  std::vector<std::vector<ScoredItem>> ballots;
  for (const auto voter : detail::content_voters(index, user)) {
    auto& ballot = ballots.emplace_back();
    for (const auto& r : detail::top_k_docs(index, index.vector(voter), model.votes_per_item, &mask))
      ballot.push_back({index.item_id(r.doc), r.score});
  }
  return {user.user_id, tally_votes(ballots, k), k};
}

// ---------------------------------------------------------------------------

using AnyModel = std::variant<CFModel, UPAModel, SUPModel>;

inline RecommendationList recommend(const CFModel& m, const UserProfile& u, std::size_t k) { return recommend_cf(m, u, k); }
inline RecommendationList recommend(const UPAModel& m, const UserProfile& u, std::size_t k) { return recommend_upa(m, u, k); }
inline RecommendationList recommend(const SUPModel& m, const UserProfile& u, std::size_t k) { return recommend_sup(m, u, k); }
inline RecommendationList recommend(const AnyModel& m, const UserProfile& u, std::size_t k) {
  return std::visit([&](const auto& model) { return recommend(model, u, k); }, m);
}

}  // namespace recbench
