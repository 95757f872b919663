/*
 * words.hpp: cyclic words over a finite alphabet with a forbidden-successor rule
 *
 * Both symbolic codings in the laboratory are subshifts of finite type:
 *   Schottky groups forbid a letter followed by its inverse,
 *   N-disk billiards forbid a letter followed by itself.
 * A periodic orbit is a primitive necklace of admissible transitions. The
 * canonical representative is the lexicographically minimal rotation, which
 * for a primitive word is a Lyndon word.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reslab/core.hpp"

namespace reslab {

using Letter = int;
using Word = std::vector<Letter>;

/// True when w is strictly smaller than every proper rotation (Duval's test).
inline bool is_lyndon(const Word& w) {
  const std::size_t n = w.size();
  if (n == 0) return false;
  std::size_t j = 1, k = 0;
  while (j < n && w[k] <= w[j]) {
    k = (w[k] < w[j]) ? 0 : k + 1;
    ++j;
  }
  return k == 0 && j == n;
}

/// Lexicographically minimal rotation. Words here are short, O(n^2) is fine.
inline Word minimal_rotation(const Word& w) {
  const std::size_t n = w.size();
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const Letter x = w[(k + i) % n], y = w[(best + i) % n];
      if (x != y) {
        if (x < y) best = k;
        break;
      }
    }
  }
  Word r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = w[(best + i) % n];
  return r;
}

/// Smallest p dividing n with w = (w[0..p))^{n/p}.
inline std::size_t primitive_period(const Word& w) {
  const std::size_t n = w.size();
  for (std::size_t p = 1; p < n; ++p) {
    if (n % p) continue;
    bool ok = true;
    for (std::size_t i = p; i < n && ok; ++i) ok = w[i] == w[i - p];
    if (ok) return p;
  }
  return n;
}

inline bool is_primitive(const Word& w) { return !w.empty() && primitive_period(w) == w.size(); }

/// Forbidden-successor rules. forbidden(a, b) is true when b may not follow a.
struct FreeGroupRule {
  int rank;
  int inverse(Letter a) const { return (a + rank) % (2 * rank); }
  bool forbidden(Letter a, Letter b) const { return b == inverse(a); }
  int alphabet_size() const { return 2 * rank; }
};

struct NoRepeatRule {
  int letters;
  bool forbidden(Letter a, Letter b) const { return a == b; }
  int alphabet_size() const { return letters; }
};

template <class Rule>
bool is_cyclically_admissible(const Word& w, const Rule& rule) {
  const std::size_t n = w.size();
  if (n == 0) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (rule.forbidden(w[i], w[(i + 1) % n])) return false;
  return true;
}

/// All primitive cyclically admissible necklaces of length 1..max_length, one
/// canonical (Lyndon) representative each, ordered by (length, lexicographic).
/// Throws CombinatorialOverflow once more than `cap` classes are produced.
template <class Rule>
std::vector<Word> enumerate_necklaces(const Rule& rule, int max_length, std::size_t cap) {
  std::vector<std::vector<Word>> by_length(static_cast<std::size_t>(std::max(max_length, 0)) + 1);
  std::size_t count = 0;
  const int q = rule.alphabet_size();
  Word w;
  w.reserve(static_cast<std::size_t>(max_length));
  // Depth-first over admissible prefixes whose letters are >= the first letter;
  // any other prefix cannot start a minimal rotation.
  auto rec = [&](auto&& self) -> void {
    const std::size_t n = w.size();
    if (n > 0 && !rule.forbidden(w.back(), w.front()) && is_lyndon(w)) {
      if (++count > cap)
        fail(ErrorKind::CombinatorialOverflow,
             "class count exceeds cap of " + std::to_string(cap));
      by_length[n].push_back(w);
    }
    if (static_cast<int>(n) == max_length) return;
    for (Letter a = (n == 0 ? 0 : w.front()); a < q; ++a) {
      if (n > 0 && rule.forbidden(w.back(), a)) continue;
      w.push_back(a);
      self(self);
      w.pop_back();
    }
  };
  rec(rec);
  std::vector<Word> out;
  out.reserve(count);
  for (auto& v : by_length) {
    std::sort(v.begin(), v.end());
    for (auto& x : v) out.push_back(std::move(x));
  }
  return out;
}

/// Letters rendered as a, b, ... for generators and A, B, ... for their inverses.
inline std::string group_word_string(const Word& w, int rank) {
  std::string s;
  for (Letter a : w) s.push_back(a < rank ? static_cast<char>('a' + a) : static_cast<char>('A' + a - rank));
  return s;
}

/// Disk labels A, B, C, ...
inline std::string disk_word_string(const Word& w) {
  std::string s;
  for (Letter a : w) s.push_back(static_cast<char>('A' + a));
  return s;
}

inline Word parse_disk_word(const std::string& s) {
  Word w;
  for (char c : s) {
    if (c < 'A' || c > 'Z') fail(ErrorKind::InvalidArgument, "disk word letters must be A..Z: " + s);
    w.push_back(c - 'A');
  }
  return w;
}

inline Word parse_group_word(const std::string& s, int rank) {
  Word w;
  for (char c : s) {
    if (c >= 'a' && c < 'a' + rank) w.push_back(c - 'a');
    else if (c >= 'A' && c < 'A' + rank) w.push_back(c - 'A' + rank);
    else fail(ErrorKind::InvalidArgument, "group word letter out of range: " + s);
  }
  return w;
}

}  // namespace reslab
