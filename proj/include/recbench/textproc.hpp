#pragma once

// Bag-of-words TF-IDF item vectors and cosine retrieval.
//
// Weights are raw term count times ln(N / df) and are not length-normalized;
// cosine normalizes at comparison time. Stopwords and terms that occur in a
// single document are dropped before weighting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "recbench/corpus.hpp"
#include "recbench/error.hpp"
#include "recbench/types.hpp"

namespace recbench {

using TermId = std::uint32_t;
using StopwordSet = std::unordered_set<std::string>;

// Selecting this attribute name concatenates every attribute of a document.
inline constexpr std::string_view kAllAttributes = "All";

// Lowercases ASCII, splits on every ASCII character that is not a letter or
// digit, and drops tokens shorter than two characters. Bytes >= 0x80 are kept
// inside tokens so UTF-8 words survive intact.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t code_points = 0;
  auto flush = [&] {
    if (code_points >= 2) tokens.push_back(current);
    current.clear();
    code_points = 0;
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80) {
      current.push_back(ch);
      if ((c & 0xC0) != 0x80) ++code_points;
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(ch);
      ++code_points;
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
      ++code_points;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

inline StopwordSet default_stopwords() {
  static constexpr std::string_view words[] = {
      "a",       "about",   "above",  "after",   "again",   "against", "all",     "am",      "an",
      "and",     "any",     "are",    "aren",    "as",      "at",      "be",      "because", "been",
      "before",  "being",   "below",  "between", "both",    "but",     "by",      "can",     "cannot",
      "could",   "couldn",  "did",    "didn",    "do",      "does",    "doesn",   "doing",   "don",
      "down",    "during",  "each",   "few",     "for",     "from",    "further", "had",     "hadn",
      "has",     "hasn",    "have",   "haven",   "having",  "he",      "her",     "here",    "hers",
      "herself", "him",     "himself", "his",    "how",     "however", "if",      "in",      "into",
      "is",      "isn",     "it",     "its",     "itself",  "just",    "ll",      "me",      "might",
      "more",    "most",    "must",   "mustn",   "my",      "myself",  "no",      "nor",     "not",
      "now",     "of",      "off",    "on",      "once",    "only",    "or",      "other",   "ought",
      "our",     "ours",    "ourselves", "out",  "over",    "own",     "re",      "same",    "shall",
      "shan",    "she",     "should", "shouldn", "so",      "some",    "such",    "than",    "that",
      "the",     "their",   "theirs", "them",    "themselves", "then", "there",   "these",   "they",
      "this",    "those",   "through", "to",     "too",     "under",   "until",   "up",      "ve",
      "very",    "was",     "wasn",   "we",      "were",    "weren",   "what",    "when",    "where",
      "which",   "while",   "who",    "whom",    "why",     "will",    "with",    "won",     "would",
      "wouldn",  "you",     "your",   "yours",   "yourself", "yourselves",
  };
  StopwordSet set;
  for (const auto w : words) set.emplace(w);
  return set;
}

// One term per line; blank lines and '#' comments ignored; terms are lowercased.
inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path);
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string term = line.substr(first, last - first + 1);
    for (auto& c : term)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    set.insert(std::move(term));
  }
  return set;
}

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> df, std::size_t n_docs)
      : terms_(std::move(terms)), df_(std::move(df)), n_docs_(n_docs) {}

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t n_docs() const noexcept { return n_docs_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& term(TermId id) const { return terms_.at(id); }
  std::size_t df(TermId id) const { return df_.at(id); }

  std::optional<TermId> find(std::string_view term) const {
    const auto it = std::lower_bound(terms_.begin(), terms_.end(), term,
                                     [](const std::string& a, std::string_view b) { return a < b; });
    if (it == terms_.end() || *it != term) return std::nullopt;
    return static_cast<TermId>(it - terms_.begin());
  }

 private:
  std::vector<std::string> terms_;  // sorted, so term ids order like the strings
  std::vector<std::size_t> df_;
  std::size_t n_docs_ = 0;
};

// Non-zero weights keyed by term id, kept sorted by id.
class SparseVector {
 public:
  using Entry = std::pair<TermId, double>;

  SparseVector() = default;

  // Sorts, sums duplicate ids and drops zero weights.
  explicit SparseVector(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (const auto& e : entries) {
      if (!entries_.empty() && entries_.back().first == e.first)
        entries_.back().second += e.second;
      else
        entries_.push_back(e);
    }
    std::erase_if(entries_, [](const Entry& e) { return e.second == 0.0; });
  }

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  double weight(TermId id) const {
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                     [](const Entry& e, TermId t) { return e.first < t; });
    return it != entries_.end() && it->first == id ? it->second : 0.0;
  }

  double norm() const {
    double sum = 0.0;
    for (const auto& [_, w] : entries_) sum += w * w;
    return std::sqrt(sum);
  }

  SparseVector scaled(double c) const {
    SparseVector out;
    out.entries_ = entries_;
    for (auto& e : out.entries_) e.second *= c;
    std::erase_if(out.entries_, [](const Entry& e) { return e.second == 0.0; });
    return out;
  }

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

namespace detail {

inline double cosine_from_parts(double dot, double norm_a, double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return std::clamp(dot / (norm_a * norm_b), 0.0, 1.0);
}

// Accumulated in ascending term order; the inverted-index scorer sums in the
// same order so both routes produce bit-identical scores.
inline double dot(const SparseVector& a, const SparseVector& b) {
  const auto ea = a.entries();
  const auto eb = b.entries();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].first < eb[j].first) {
      ++i;
    } else if (eb[j].first < ea[i].first) {
      ++j;
    } else {
      sum += ea[i].second * eb[j].second;
      ++i;
      ++j;
    }
  }
  return sum;
}

}  // namespace detail

inline double cosine(const SparseVector& a, const SparseVector& b) {
  return detail::cosine_from_parts(detail::dot(a, b), a.norm(), b.norm());
}

// Immutable once built; safe for concurrent queries.
class DocumentIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    double weight;
  };

  DocumentIndex() = default;
  DocumentIndex(std::vector<std::string> item_ids, std::vector<SparseVector> vectors, Vocabulary vocabulary,
                std::vector<std::string> attribute_selection)
      : item_ids_(std::move(item_ids)),
        vectors_(std::move(vectors)),
        vocabulary_(std::move(vocabulary)),
        attribute_selection_(std::move(attribute_selection)) {
    norms_.reserve(vectors_.size());
    postings_.assign(vocabulary_.size(), {});
    for (std::size_t d = 0; d < vectors_.size(); ++d) {
      norms_.push_back(vectors_[d].norm());
      for (const auto& [term, w] : vectors_[d].entries())
        postings_[term].push_back({static_cast<std::uint32_t>(d), w});
    }
  }

  std::size_t size() const noexcept { return item_ids_.size(); }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::string& item_id(std::size_t doc) const { return item_ids_.at(doc); }
  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<std::string>& attribute_selection() const noexcept { return attribute_selection_; }

  std::optional<std::size_t> find(std::string_view item_id) const {
    const auto it = std::lower_bound(item_ids_.begin(), item_ids_.end(), item_id,
                                     [](const std::string& a, std::string_view b) { return a < b; });
    if (it == item_ids_.end() || *it != item_id) return std::nullopt;
    return static_cast<std::size_t>(it - item_ids_.begin());
  }

  const SparseVector& vector(std::size_t doc) const { return vectors_.at(doc); }
  const SparseVector* vector_of(std::string_view item_id) const {
    const auto d = find(item_id);
    return d ? &vectors_[*d] : nullptr;
  }
  double norm(std::size_t doc) const { return norms_.at(doc); }
  std::span<const Posting> postings(TermId term) const { return postings_.at(term); }

  // Documents whose vector is empty; content-based methods can never rank them.
  std::vector<std::string> empty_documents() const {
    std::vector<std::string> out;
    for (std::size_t d = 0; d < size(); ++d)
      if (vectors_[d].empty()) out.push_back(item_ids_[d]);
    return out;
  }

 private:
  std::vector<std::string> item_ids_;  // sorted; doc index order == item_id order
  std::vector<SparseVector> vectors_;
  std::vector<double> norms_;
  Vocabulary vocabulary_;
  std::vector<std::string> attribute_selection_;
  std::vector<std::vector<Posting>> postings_;
};

inline std::string selection_label(const std::vector<std::string>& selection) {
  std::string label;
  for (const auto& name : selection) {
    if (!label.empty()) label += '+';
    label += name;
  }
  return label;
}

inline DocumentIndex build_index(const ContentCorpus& corpus, const std::vector<std::string>& attribute_selection,
                                 const StopwordSet& stopwords) {
  if (corpus.empty()) throw ConfigError("content corpus is empty");
  if (attribute_selection.empty()) throw ConfigError("attribute selection is empty");

  const bool use_all = std::find(attribute_selection.begin(), attribute_selection.end(),
                                 std::string(kAllAttributes)) != attribute_selection.end();
  if (use_all && attribute_selection.size() != 1)
    throw ConfigError("\"All\" cannot be combined with other attributes");
  if (!use_all) {
    const auto known = corpus.attribute_names();
    std::vector<std::string> problems;
    for (const auto& name : attribute_selection)
      if (!known.count(name)) problems.push_back("attribute \"" + name + "\" does not occur in any document");
    if (!problems.empty()) throw ConfigError(std::move(problems));
  }

  const std::size_t n_docs = corpus.size();
  std::vector<std::string> item_ids;
  std::vector<std::unordered_map<std::string, std::size_t>> counts;
  std::unordered_map<std::string, std::size_t> df;
  item_ids.reserve(n_docs);
  counts.reserve(n_docs);
  for (const auto& [item_id, doc] : corpus.documents()) {
    std::unordered_map<std::string, std::size_t> tf;
    auto add_text = [&](const std::string& text) {
      for (auto& tok : tokenize(text))
        if (!stopwords.count(tok)) ++tf[std::move(tok)];
    };
    if (use_all) {
      for (const auto& [_, text] : doc.attributes) add_text(text);
    } else {
      for (const auto& name : attribute_selection) {
        const auto it = doc.attributes.find(name);
        if (it != doc.attributes.end()) add_text(it->second);
      }
    }
    for (const auto& [term, _] : tf) ++df[term];
    item_ids.push_back(item_id);
    counts.push_back(std::move(tf));
  }

  std::vector<std::string> terms;
  for (const auto& [term, n] : df)
    if (n >= 2) terms.push_back(term);
  if (terms.empty()) throw ConfigError("vocabulary is empty after stopword and DF=1 filtering");
  std::sort(terms.begin(), terms.end());
  std::vector<std::size_t> term_df;
  std::unordered_map<std::string, TermId> term_ids;
  term_df.reserve(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    term_df.push_back(df[terms[t]]);
    term_ids.emplace(terms[t], static_cast<TermId>(t));
  }

  std::vector<SparseVector> vectors;
  vectors.reserve(n_docs);
  const auto n = static_cast<double>(n_docs);
  for (const auto& tf : counts) {
    std::vector<SparseVector::Entry> entries;
    for (const auto& [term, count] : tf) {
      const auto it = term_ids.find(term);
      if (it == term_ids.end()) continue;
      const double idf = std::log(n / static_cast<double>(term_df[it->second]));
      entries.emplace_back(it->second, static_cast<double>(count) * idf);
    }
    vectors.emplace_back(std::move(entries));
  }
  return DocumentIndex(std::move(item_ids), std::move(vectors), Vocabulary(std::move(terms), std::move(term_df), n_docs),
                       attribute_selection);
}

namespace detail {

struct DocScore {
  std::size_t doc;
  double score;
};

inline bool ranks_before(const DocScore& a, const DocScore& b) {
  return a.score != b.score ? a.score > b.score : a.doc < b.doc;
}

// Cosine of `query` against every document through the postings lists.
// Documents flagged in `excluded` (indexed by doc) and zero scores are dropped.
// Result is sorted by score descending, then doc (== item_id) ascending.
inline std::vector<DocScore> top_k_docs(const DocumentIndex& index, const SparseVector& query, std::size_t k,
                                        const std::vector<char>* excluded) {
  std::vector<DocScore> ranked;
  const double qnorm = query.norm();
  if (k == 0 || qnorm == 0.0) return ranked;
  std::vector<double> acc(index.size(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& [term, qw] : query.entries()) {
    if (term >= index.vocabulary().size()) continue;
    for (const auto& p : index.postings(term)) {
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += qw * p.weight;
    }
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (const auto d : touched) {
    if (excluded && (*excluded)[d]) continue;
    const double s = cosine_from_parts(acc[d], qnorm, index.norm(d));
    if (s > 0.0) ranked.push_back({d, s});
  }
  const auto keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), ranks_before);
  ranked.resize(keep);
  return ranked;
}

}  // namespace detail

inline std::vector<ScoredItem> top_k_similar(const DocumentIndex& index, const SparseVector& query, std::size_t k,
                                             const std::set<std::string>& exclude = {}) {
  if (k == 0) throw Error("top_k_similar requires k >= 1");
  std::vector<char> mask(index.size(), 0);
  for (const auto& id : exclude)
    if (const auto d = index.find(id)) mask[*d] = 1;
  std::vector<ScoredItem> out;
  for (const auto& r : detail::top_k_docs(index, query, k, &mask)) out.push_back({index.item_id(r.doc), r.score});
  return out;
}

}  // namespace recbench
