#pragma once

// Interaction and content data, dataset statistics, and Given-N / k-fold
// split planning.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "recbench/detail/random.hpp"
#include "recbench/error.hpp"

namespace recbench {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;

  bool operator==(const Interaction&) const = default;
};

enum class FeedbackFormat { Explicit, Implicit };

// Sparse user x item activity matrix. Users, items and interactions are kept
// sorted so that iteration order (and everything derived from it) is stable.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  // Duplicate (user, item) rows collapse to the last occurrence. The extra
  // user/item lists widen the universe without adding activity (used to keep
  // the full catalog in training splits).
  static InteractionDataset from_interactions(std::vector<Interaction> rows,
                                              std::vector<std::string> extra_users = {},
                                              std::vector<std::string> extra_items = {}) {
    for (const auto& r : rows) validate(r);
    if (rows.empty()) throw EmptyDatasetError("dataset has no interactions");

    std::stable_sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
      return std::tie(a.user_id, a.item_id) < std::tie(b.user_id, b.item_id);
    });
    InteractionDataset ds;
    ds.interactions_.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool last_of_key = i + 1 == rows.size() || rows[i].user_id != rows[i + 1].user_id ||
                               rows[i].item_id != rows[i + 1].item_id;
      if (last_of_key) ds.interactions_.push_back(std::move(rows[i]));
    }

    std::vector<std::string> users = std::move(extra_users);
    std::vector<std::string> items = std::move(extra_items);
    users.reserve(users.size() + ds.interactions_.size());
    items.reserve(items.size() + ds.interactions_.size());
    for (const auto& r : ds.interactions_) {
      if (users.empty() || users.back() != r.user_id) users.push_back(r.user_id);
      items.push_back(r.item_id);
    }
    ds.users_ = sorted_unique(std::move(users));
    ds.items_ = sorted_unique(std::move(items));
    for (const auto& u : ds.users_)
      if (u.empty()) throw Error("user_id must be non-empty");
    for (const auto& i : ds.items_)
      if (i.empty()) throw Error("item_id must be non-empty");

    ds.profile_begin_.assign(ds.users_.size() + 1, 0);
    std::size_t pos = 0;
    for (std::size_t u = 0; u < ds.users_.size(); ++u) {
      ds.profile_begin_[u] = pos;
      while (pos < ds.interactions_.size() && ds.interactions_[pos].user_id == ds.users_[u]) ++pos;
    }
    ds.profile_begin_[ds.users_.size()] = pos;
    return ds;
  }

  const std::vector<std::string>& users() const noexcept { return users_; }
  const std::vector<std::string>& items() const noexcept { return items_; }
  std::span<const Interaction> interactions() const noexcept { return interactions_; }

  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t item_count() const noexcept { return items_.size(); }
  std::size_t activity_count() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }

  std::optional<std::size_t> user_index(std::string_view user_id) const { return find(users_, user_id); }
  std::optional<std::size_t> item_index(std::string_view item_id) const { return find(items_, item_id); }
  bool has_user(std::string_view user_id) const { return user_index(user_id).has_value(); }

  // Interactions of one user, sorted by item_id.
  std::span<const Interaction> profile(std::size_t user) const {
    return std::span<const Interaction>(interactions_).subspan(
        profile_begin_[user], profile_begin_[user + 1] - profile_begin_[user]);
  }
  std::span<const Interaction> profile(std::string_view user_id) const {
    const auto idx = user_index(user_id);
    return idx ? profile(*idx) : std::span<const Interaction>{};
  }

 private:
  static void validate(const Interaction& r) {
    if (r.user_id.empty()) throw Error("interaction with empty user_id");
    if (r.item_id.empty()) throw Error("interaction with empty item_id");
    if (r.rating && (!std::isfinite(*r.rating) || *r.rating < 0.0))
      throw Error("rating must be finite and non-negative");
  }

  static std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }

  static std::optional<std::size_t> find(const std::vector<std::string>& sorted, std::string_view key) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), key,
                                     [](const std::string& a, std::string_view b) { return a < b; });
    if (it == sorted.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - sorted.begin());
  }

  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<Interaction> interactions_;
  std::vector<std::size_t> profile_begin_{0};
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || errno == ERANGE) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size() || errno == ERANGE) return std::nullopt;
  return static_cast<std::int64_t>(v);
}

}  // namespace detail

// Reads `user<TAB>item[<TAB>rating[<TAB>timestamp]]` records. Blank lines and
// lines starting with '#' are skipped. Implicit feedback always gets rating 1.
inline InteractionDataset parse_interactions(std::istream& in, FeedbackFormat format) {
  std::vector<Interaction> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;

    const auto fields = detail::split_tabs(view);
    if (fields.size() < 2 || fields.size() > 4) throw ParseError(line_no, "expected 2 to 4 tab-separated fields");
    if (format == FeedbackFormat::Explicit && fields.size() < 3)
      throw ParseError(line_no, "explicit feedback requires a rating field");
    if (fields[0].empty()) throw ParseError(line_no, "empty user_id");
    if (fields[1].empty()) throw ParseError(line_no, "empty item_id");

    Interaction row{std::string(fields[0]), std::string(fields[1]), std::nullopt, std::nullopt};
    if (fields.size() >= 3) {
      const auto rating = detail::parse_real(fields[2]);
      if (format == FeedbackFormat::Explicit) {
        if (!rating || !std::isfinite(*rating) || *rating < 0.0)
          throw ParseError(line_no, "rating must be a finite non-negative number");
        row.rating = rating;
      } else if (!fields[2].empty() && !rating) {
        throw ParseError(line_no, "unparsable rating field");
      }
    }
    if (format == FeedbackFormat::Implicit) row.rating = 1.0;
    if (fields.size() == 4) {
      const auto ts = detail::parse_int(fields[3]);
      if (!ts) throw ParseError(line_no, "timestamp must be an integer");
      row.timestamp = ts;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDatasetError("interactions input contains no records");
  return InteractionDataset::from_interactions(std::move(rows));
}

inline InteractionDataset load_interactions(const std::string& path, FeedbackFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interactions file: " + path);
  return parse_interactions(in, format);
}

struct ItemDocument {
  std::string item_id;
  std::map<std::string, std::string> attributes;
};

class ContentCorpus {
 public:
  ContentCorpus() = default;

  // Throws on a duplicate item_id.
  void add(ItemDocument doc) {
    if (doc.item_id.empty()) throw Error("document with empty item_id");
    const std::string id = doc.item_id;
    if (!documents_.emplace(id, std::move(doc)).second) throw Error("duplicate document for item " + id);
  }

  const std::map<std::string, ItemDocument>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  bool contains(const std::string& item_id) const { return documents_.count(item_id) != 0; }

  // Every attribute name used by at least one document.
  std::set<std::string> attribute_names() const {
    std::set<std::string> names;
    for (const auto& [_, doc] : documents_)
      for (const auto& [name, _text] : doc.attributes) names.insert(name);
    return names;
  }

  // Dataset items that have no document (reported, not fatal).
  std::vector<std::string> missing_items(const InteractionDataset& ds) const {
    std::vector<std::string> missing;
    for (const auto& item : ds.items())
      if (!contains(item)) missing.push_back(item);
    return missing;
  }

 private:
  std::map<std::string, ItemDocument> documents_;
};

// JSON Lines: {"item_id": "...", "attributes": {"Title": "...", ...}}
inline ContentCorpus parse_content(std::istream& in) {
  ContentCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("item_id") || !obj["item_id"].is_string())
      throw ParseError(line_no, "record needs a string \"item_id\"");
    ItemDocument doc;
    doc.item_id = obj["item_id"].get<std::string>();
    if (doc.item_id.empty()) throw ParseError(line_no, "empty item_id");
    if (obj.contains("attributes")) {
      const auto& attrs = obj["attributes"];
      if (!attrs.is_object()) throw ParseError(line_no, "\"attributes\" must be an object");
      for (const auto& [name, text] : attrs.items()) {
        if (!text.is_string()) throw ParseError(line_no, "attribute \"" + name + "\" must be a string");
        doc.attributes.emplace(name, text.get<std::string>());
      }
    }
    if (corpus.contains(doc.item_id)) throw ParseError(line_no, "duplicate item_id " + doc.item_id);
    corpus.add(std::move(doc));
  }
  return corpus;
}

inline ContentCorpus load_content(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open content file: " + path);
  return parse_content(in);
}

struct DatasetStats {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_activities = 0;
  double items_per_user_ratio = 0.0;
  double avg_items_per_user = 0.0;
  double avg_users_per_item = 0.0;
  std::size_t max_items_per_user = 0;
  std::size_t min_items_per_user = 0;
  std::size_t max_users_per_item = 0;
  std::size_t min_users_per_item = 0;
  double sparsity = 0.0;
};

inline DatasetStats compute_stats(const InteractionDataset& ds) {
  if (ds.empty()) throw EmptyDatasetError("cannot compute statistics of an empty dataset");
  DatasetStats s;
  s.n_users = ds.user_count();
  s.n_items = ds.item_count();
  s.n_activities = ds.activity_count();
  const auto users = static_cast<double>(s.n_users);
  const auto items = static_cast<double>(s.n_items);
  const auto acts = static_cast<double>(s.n_activities);
  s.items_per_user_ratio = items / users;
  s.avg_items_per_user = acts / users;
  s.avg_users_per_item = acts / items;
  s.sparsity = 1.0 - acts / (users * items);

  s.min_items_per_user = std::numeric_limits<std::size_t>::max();
  for (std::size_t u = 0; u < s.n_users; ++u) {
    const auto n = ds.profile(u).size();
    s.max_items_per_user = std::max(s.max_items_per_user, n);
    s.min_items_per_user = std::min(s.min_items_per_user, n);
  }
  std::vector<std::size_t> raters(s.n_items, 0);
  for (const auto& r : ds.interactions()) ++raters[*ds.item_index(r.item_id)];
  const auto [lo, hi] = std::minmax_element(raters.begin(), raters.end());
  s.min_users_per_item = *lo;
  s.max_users_per_item = *hi;
  return s;
}

struct SplitPlan {
  std::size_t fold_count = 10;
  std::size_t given_n = 10;
  std::size_t min_train_items = 10;
  std::uint64_t rng_seed = 0;
  std::map<std::string, std::size_t> folds;  // eligible user -> fold index

  std::vector<std::string> users_in_fold(std::size_t fold) const {
    std::vector<std::string> out;
    for (const auto& [user, f] : folds)
      if (f == fold) out.push_back(user);
    return out;
  }

  bool operator==(const SplitPlan&) const = default;
};

struct HoldoutSplit {
  InteractionDataset train;
  std::map<std::string, std::set<std::string>> hidden;  // H_u for each test user
};

// Eligible users (profile >= given_n + min_train_items) are shuffled with the
// seed and dealt round-robin into folds. Everyone else stays training-only.
inline SplitPlan plan_splits(const InteractionDataset& ds, std::size_t fold_count, std::size_t given_n,
                             std::size_t min_train_items, std::uint64_t rng_seed) {
  if (fold_count == 0 || given_n == 0 || min_train_items == 0)
    throw ProtocolError("fold_count, given_n and min_train_items must be positive");
  std::vector<std::string> eligible;
  for (std::size_t u = 0; u < ds.user_count(); ++u)
    if (ds.profile(u).size() >= given_n + min_train_items) eligible.push_back(ds.users()[u]);
  if (eligible.empty())
    throw ProtocolError("no user has at least " + std::to_string(given_n + min_train_items) + " interactions");
  if (eligible.size() < fold_count)
    throw ProtocolError(std::to_string(eligible.size()) + " eligible users cannot fill " +
                        std::to_string(fold_count) + " folds");

  std::mt19937_64 rng(rng_seed);
  detail::shuffle(eligible, rng);
  SplitPlan plan{fold_count, given_n, min_train_items, rng_seed, {}};
  for (std::size_t i = 0; i < eligible.size(); ++i) plan.folds.emplace(eligible[i], i % fold_count);
  return plan;
}

inline HoldoutSplit materialize_split(const InteractionDataset& ds, const SplitPlan& plan, std::size_t fold) {
  if (fold >= plan.fold_count)
    throw ProtocolError("fold " + std::to_string(fold) + " out of range for " + std::to_string(plan.fold_count) +
                        " folds");
  HoldoutSplit split;
  std::vector<Interaction> train;
  train.reserve(ds.activity_count());
  for (std::size_t u = 0; u < ds.user_count(); ++u) {
    const auto& user = ds.users()[u];
    const auto profile = ds.profile(u);
    const auto it = plan.folds.find(user);
    if (it == plan.folds.end() || it->second != fold) {
      train.insert(train.end(), profile.begin(), profile.end());
      continue;
    }
    if (profile.size() < plan.given_n + plan.min_train_items)
      throw ProtocolError("user " + user + " no longer satisfies the eligibility threshold");

    // Partial Fisher-Yates: the first given_n slots become the hidden set.
    std::vector<std::size_t> order(profile.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = detail::derived_stream(plan.rng_seed, fold, user);
    for (std::size_t i = 0; i < plan.given_n; ++i) {
      const auto j = i + static_cast<std::size_t>(detail::uniform_below(rng, order.size() - i));
      std::swap(order[i], order[j]);
    }
    std::vector<bool> is_hidden(profile.size(), false);
    auto& hidden = split.hidden[user];
    for (std::size_t i = 0; i < plan.given_n; ++i) {
      is_hidden[order[i]] = true;
      hidden.insert(profile[order[i]].item_id);
    }
    for (std::size_t i = 0; i < profile.size(); ++i)
      if (!is_hidden[i]) train.push_back(profile[i]);
  }
  split.train = InteractionDataset::from_interactions(std::move(train), ds.users(), ds.items());
  return split;
}

}  // namespace recbench
