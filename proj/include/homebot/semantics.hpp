#pragma once

// Word embeddings and a category table for shelf placement, plus orthographic rhyme
// correction of heard drink names.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace homebot {

/// Lower case with spaces folded to underscores, the key form used by both tables.
inline std::string normalize_label(std::string_view s) {
  std::string out;
  for (char c : s) out += c == ' ' ? '_' : char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class EmbeddingTable {
 public:
  /// Lines `word v1 ... vD`; blank lines and `#` comments are skipped.
  static EmbeddingTable parse(std::istream& in) {
    EmbeddingTable t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      std::istringstream ls(line);
      std::string word;
      if (!(ls >> word)) continue;
      std::vector<double> v;
      for (double x; ls >> x;) v.push_back(x);
      if (!ls.eof()) throw std::runtime_error("embeddings line " + std::to_string(line_no) + ": bad number");
      t.add(word, std::move(v));
    }
    return t;
  }

  void add(std::string_view word, std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("embedding for '" + std::string(word) + "' is empty");
    if (dim_ != 0 && v.size() != dim_) throw std::invalid_argument("embedding for '" + std::string(word) + "' has wrong dimension");
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }))
      throw std::invalid_argument("embedding for '" + std::string(word) + "' is a zero vector");
    dim_ = v.size();
    vectors_[normalize_label(word)] = std::move(v);
  }

  const std::vector<double>* find(std::string_view word) const {
    auto it = vectors_.find(normalize_label(word));
    return it == vectors_.end() ? nullptr : &it->second;
  }
  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
  std::size_t dim_ = 0;
};

class CategoryKB {
 public:
  /// Lines `label category`.
  static CategoryKB parse(std::istream& in) {
    CategoryKB kb;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      std::istringstream ls(line);
      std::string label, category, extra;
      if (!(ls >> label)) continue;
      if (!(ls >> category) || (ls >> extra))
        throw std::runtime_error("categories line " + std::to_string(line_no) + ": expected 'label category'");
      kb.add(label, category);
    }
    return kb;
  }

  void add(std::string_view label, std::string_view category) {
    if (!categories_.emplace(normalize_label(label), normalize_label(category)).second)
      throw std::invalid_argument("duplicate category label '" + std::string(label) + "'");
  }

  std::optional<std::string> category(std::string_view label) const {
    auto it = categories_.find(normalize_label(label));
    if (it == categories_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return categories_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> categories_;
};

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

enum class ShelfAggregate { mean, max };

/// Shelf id -> labels of the objects already on it; iteration order is the tie-break order.
using ShelfContents = std::map<std::string, std::vector<std::string>>;

/// A shelf holding something of the grasped object's category wins outright; otherwise
/// the shelf with the best aggregate cosine similarity. Empty shelves score -inf.
inline std::string choose_shelf(std::string_view grasped, const ShelfContents& shelves, const CategoryKB& kb,
                                const EmbeddingTable& emb, ShelfAggregate agg = ShelfAggregate::mean) {
  if (shelves.empty()) throw std::invalid_argument("choose_shelf: no shelves");
  const auto cat = kb.category(grasped);
  const auto* gv = emb.find(grasped);
  if (!cat && !gv) throw std::invalid_argument("choose_shelf: '" + std::string(grasped) + "' is unknown");
  if (cat)
    for (const auto& [id, labels] : shelves)
      for (const auto& l : labels)
        if (kb.category(l) == cat) return id;

  const double ninf = -std::numeric_limits<double>::infinity();
  std::string best = shelves.begin()->first;
  double best_score = ninf;
  if (!gv) return best;
  for (const auto& [id, labels] : shelves) {
    double score = ninf, sum = 0.0;
    int n = 0;
    for (const auto& l : labels) {
      const auto* v = emb.find(l);
      if (!v) continue;
      const double s = cosine_similarity(*gv, *v);
      sum += s;
      score = n == 0 ? s : std::max(score, s);
      ++n;
    }
    if (n > 0 && agg == ShelfAggregate::mean) score = sum / n;
    if (score > best_score) {
      best_score = score;
      best = id;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rhyme correction

inline bool is_vowel(char c) {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    default: return false;
  }
}

/// Suffix starting at the last run of vowels; the whole word when it has none.
inline std::string rhyme_key(std::string_view word) {
  const std::string w = normalize_label(word);
  std::size_t end = w.size();
  while (end > 0 && !is_vowel(w[end - 1])) --end;
  if (end == 0) return w;
  std::size_t start = end - 1;
  while (start > 0 && is_vowel(w[start - 1])) --start;
  return w.substr(start);
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Maps a heard word onto the menu: exact match, then a unique rhyme, then a unique
/// nearest spelling within edit distance 2. Anything ambiguous returns none.
inline std::optional<std::string> rhyme_correct(std::string_view heard, const std::vector<std::string>& menu) {
  if (menu.empty()) throw std::invalid_argument("rhyme_correct: empty menu");
  const std::string h = normalize_label(heard);
  for (const auto& m : menu)
    if (normalize_label(m) == h) return m;

  const std::string key = rhyme_key(h);
  std::vector<const std::string*> sharers;
  for (const auto& m : menu)
    if (rhyme_key(m) == key) sharers.push_back(&m);
  if (sharers.size() == 1) return *sharers.front();

  std::size_t best = std::numeric_limits<std::size_t>::max();
  const std::string* pick = nullptr;
  bool tie = false;
  for (const auto& m : menu) {
    const std::size_t d = edit_distance(h, normalize_label(m));
    if (d < best) {
      best = d;
      pick = &m;
      tie = false;
    } else if (d == best) {
      tie = true;
    }
  }
  if (best <= 2 && !tie) return *pick;
  return std::nullopt;
}

}  // namespace homebot
