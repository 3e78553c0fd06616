#pragma once

// Factor representations used by the join engine and message passing:
// mixed-radix tuple indices, indexed lists, hashed factors and level-order tries.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "joininfer/model.hpp"

namespace joininfer {

using Index = std::uint64_t;

/// Largest supported mixed-radix product (indices must fit a signed 64-bit value).
inline constexpr Index kMaxRadixProduct = static_cast<Index>(std::numeric_limits<std::int64_t>::max());

enum class Direction {
  Forward,  ///< first variable most significant
  Reverse,  ///< last variable most significant
};

/// Product of `cards`, or IndexOverflow when it exceeds 2^63 - 1.
inline Index radix_product(std::span<const std::uint32_t> cards) {
  Index prod = 1;
  for (auto c : cards) {
    if (c == 0) throw Error(Errc::ValueOutOfRange, "storage", "zero cardinality in radix");
    if (prod > kMaxRadixProduct / c)
      throw Error(Errc::IndexOverflow, "storage", "radix product exceeds 2^63-1");
    prod *= c;
  }
  return prod;
}

/// Encodes without checking the radix product; callers validate once up front.
inline Index encode_index_unchecked(std::span<const Value> tuple,
                                    std::span<const std::uint32_t> cards, Direction dir) {
  Index idx = 0;
  const std::size_t k = tuple.size();
  if (dir == Direction::Forward) {
    for (std::size_t i = 0; i < k; ++i) idx = idx * cards[i] + tuple[i];
  } else {
    for (std::size_t i = k; i-- > 0;) idx = idx * cards[i] + tuple[i];
  }
  return idx;
}

inline Index encode_index(std::span<const Value> tuple, std::span<const std::uint32_t> cards,
                          Direction dir) {
  if (tuple.size() != cards.size())
    throw Error(Errc::ArityMismatch, "storage", "tuple and radix lengths differ");
  radix_product(cards);
  for (std::size_t i = 0; i < tuple.size(); ++i)
    if (tuple[i] >= cards[i]) throw Error(Errc::ValueOutOfRange, "storage", "digit exceeds radix");
  return encode_index_unchecked(tuple, cards, dir);
}

inline std::vector<Value> decode_index(Index idx, std::span<const std::uint32_t> cards,
                                       Direction dir) {
  std::vector<Value> tuple(cards.size());
  if (dir == Direction::Forward) {
    for (std::size_t i = cards.size(); i-- > 0;) {
      tuple[i] = static_cast<Value>(idx % cards[i]);
      idx /= cards[i];
    }
  } else {
    for (std::size_t i = 0; i < cards.size(); ++i) {
      tuple[i] = static_cast<Value>(idx % cards[i]);
      idx /= cards[i];
    }
  }
  return tuple;
}

// ---------------------------------------------------------------------------
// Indexed lists

struct IndexedEntry {
  Index index = 0;
  double prob = 0.0;

  friend bool operator==(const IndexedEntry&, const IndexedEntry&) = default;
};

/// A factor as index/probability records. `ReverseOnly` keeps (reverse, prob)
/// pairs sorted by reverse index; `Dual` keeps (forward, reverse, prob) triples
/// in the factor's row order.
class IndexedList {
 public:
  enum class Variant { ReverseOnly, Dual };

  static IndexedList from_factor(const FactorTable& f, Variant variant) {
    IndexedList list;
    list.variant_ = variant;
    list.radix_ = f.scope().cardinalities();
    radix_product(list.radix_);
    list.reverse_.reserve(f.size());
    list.probs_.assign(f.probs().begin(), f.probs().end());
    if (variant == Variant::Dual) list.forward_.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      list.reverse_.push_back(encode_index_unchecked(f.row(i), list.radix_, Direction::Reverse));
      if (variant == Variant::Dual)
        list.forward_.push_back(encode_index_unchecked(f.row(i), list.radix_, Direction::Forward));
    }
    if (variant == Variant::ReverseOnly) {
      std::vector<std::size_t> order(list.reverse_.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return list.reverse_[a] < list.reverse_[b]; });
      std::vector<Index> r;
      std::vector<double> p;
      r.reserve(order.size());
      p.reserve(order.size());
      for (auto i : order) {
        r.push_back(list.reverse_[i]);
        p.push_back(list.probs_[i]);
      }
      list.reverse_ = std::move(r);
      list.probs_ = std::move(p);
    }
    return list;
  }

  Variant variant() const noexcept { return variant_; }
  const std::vector<std::uint32_t>& radix() const noexcept { return radix_; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const Index> forward() const noexcept { return forward_; }
  std::span<const Index> reverse() const noexcept { return reverse_; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<double> probs_mut() noexcept { return probs_; }

  /// Entries keyed by the requested direction (Dual lists only for Forward).
  std::vector<IndexedEntry> entries(Direction dir) const {
    const auto& keys = dir == Direction::Forward ? forward_ : reverse_;
    if (keys.size() != probs_.size())
      throw Error(Errc::InvalidArgument, "storage", "list does not carry forward indices");
    std::vector<IndexedEntry> out(probs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {keys[i], probs_[i]};
    return out;
  }

 private:
  Variant variant_ = Variant::ReverseOnly;
  std::vector<std::uint32_t> radix_;
  std::vector<Index> forward_;
  std::vector<Index> reverse_;
  std::vector<double> probs_;
};

/// Hash table from a tuple index (in one stated radix/direction) to probability.
class HashedFactor {
 public:
  HashedFactor(std::vector<std::uint32_t> radix, Direction dir)
      : radix_(std::move(radix)), dir_(dir) {
    radix_product(radix_);
  }

  static HashedFactor from_entries(std::vector<std::uint32_t> radix, Direction dir,
                                   std::span<const IndexedEntry> entries) {
    HashedFactor h(std::move(radix), dir);
    h.map_.reserve(entries.size());
    for (const auto& e : entries)
      if (e.prob > 0.0) h.map_[e.index] = e.prob;
    return h;
  }

  static HashedFactor from_factor(const FactorTable& f, Direction dir) {
    HashedFactor h(f.scope().cardinalities(), dir);
    h.map_.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
      h.map_[encode_index_unchecked(f.row(i), h.radix_, dir)] = f.prob(i);
    return h;
  }

  const std::vector<std::uint32_t>& radix() const noexcept { return radix_; }
  Direction direction() const noexcept { return dir_; }
  std::size_t size() const noexcept { return map_.size(); }

  const double* find(Index idx) const {
    auto it = map_.find(idx);
    return it == map_.end() ? nullptr : &it->second;
  }

  void set(Index idx, double p) {
    if (p > 0.0) map_[idx] = p;
    else map_.erase(idx);
  }

 private:
  std::vector<std::uint32_t> radix_;
  Direction dir_;
  std::unordered_map<Index, double> map_;
};

// ---------------------------------------------------------------------------
// Level-order tries

/// A trie flattened into one contiguous array per level. Children of node `i`
/// at level l occupy [child_start[l][i], child_start[l][i+1]) of level l+1
/// (CSR layout with a trailing sentinel). Leaves align with `leaf_probs`.
struct LevelOrderTrie {
  std::vector<VarId> var_order;
  std::vector<std::vector<Value>> values;
  std::vector<std::vector<std::uint32_t>> child_start;
  std::vector<double> leaf_probs;

  std::size_t depth() const noexcept { return var_order.size(); }
  std::size_t leaves() const noexcept { return leaf_probs.size(); }

  /// Child range at `level` below `parent` (a node index at level-1; ignored at level 0).
  std::pair<std::uint32_t, std::uint32_t> children(std::size_t level, std::uint32_t parent) const {
    if (level == 0) return {0, static_cast<std::uint32_t>(values[0].size())};
    const auto& cs = child_start[level - 1];
    return {cs[parent], cs[parent + 1]};
  }

  /// Enumerates all (tuple in var_order, prob) rows; used to check the layout.
  FactorTable enumerate(const FactorScope& ordered_scope) const {
    const std::size_t k = depth();
    std::vector<Value> flat;
    std::vector<double> probs(leaf_probs);
    flat.resize(leaf_probs.size() * k);
    if (k > 0) {
      // Walk each leaf upward via the parent of every node.
      std::vector<std::vector<std::uint32_t>> parent(k);
      for (std::size_t l = 1; l < k; ++l) {
        parent[l].resize(values[l].size());
        const auto& cs = child_start[l - 1];
        for (std::uint32_t p = 0; p + 1 < cs.size(); ++p)
          for (auto c = cs[p]; c < cs[p + 1]; ++c) parent[l][c] = p;
      }
      for (std::uint32_t leaf = 0; leaf < leaf_probs.size(); ++leaf) {
        std::uint32_t node = leaf;
        for (std::size_t l = k; l-- > 0;) {
          flat[leaf * k + l] = values[l][node];
          if (l > 0) node = parent[l][node];
        }
      }
    }
    return FactorTable::from_sorted(ordered_scope, std::move(flat), std::move(probs));
  }
};

/// Builds the level-order trie of `f` under `var_order` (a permutation of the
/// scope). Rows are keyed by their mixed-radix index under `var_order`, sorted
/// once, and the levels are emitted in a single pass.
inline LevelOrderTrie build_trie(const FactorTable& f, std::span<const VarId> var_order) {
  const auto pos = detail::positions_in(f.scope(), var_order);
  if (pos.size() != f.arity())
    throw Error(Errc::InconsistentOrder, "storage", "trie order must permute the factor scope");
  const std::size_t k = pos.size();
  std::vector<std::uint32_t> cards(k);
  for (std::size_t j = 0; j < k; ++j) cards[j] = f.scope()[pos[j]].cardinality;
  radix_product(cards);

  LevelOrderTrie trie;
  trie.var_order.assign(var_order.begin(), var_order.end());
  trie.values.resize(k);
  trie.child_start.resize(k > 0 ? k - 1 : 0);
  if (k == 0) {
    trie.leaf_probs.assign(f.probs().begin(), f.probs().end());
    return trie;
  }

  bool identity = true;
  for (std::size_t j = 0; j < k; ++j) identity = identity && pos[j] == j;

  std::vector<std::pair<Index, double>> keyed(f.size());
  std::vector<Value> tuple(k);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto r = f.row(i);
    for (std::size_t j = 0; j < k; ++j) tuple[j] = r[pos[j]];
    keyed[i] = {encode_index_unchecked(tuple, cards, Direction::Forward), f.prob(i)};
  }
  if (!identity) std::sort(keyed.begin(), keyed.end());

  std::vector<Value> prev(k, 0);
  trie.leaf_probs.reserve(keyed.size());
  for (std::size_t n = 0; n < keyed.size(); ++n) {
    Index idx = keyed[n].first;
    for (std::size_t j = k; j-- > 0;) {
      tuple[j] = static_cast<Value>(idx % cards[j]);
      idx /= cards[j];
    }
    // First level where this row departs from the previous one.
    std::size_t diverge = 0;
    if (n > 0)
      while (diverge < k && tuple[diverge] == prev[diverge]) ++diverge;
    for (std::size_t l = diverge; l < k; ++l) {
      if (l + 1 < k)
        trie.child_start[l].push_back(static_cast<std::uint32_t>(trie.values[l + 1].size()));
      trie.values[l].push_back(tuple[l]);
    }
    trie.leaf_probs.push_back(keyed[n].second);
    prev = tuple;
  }
  for (std::size_t l = 0; l + 1 < k; ++l)
    trie.child_start[l].push_back(static_cast<std::uint32_t>(trie.values[l + 1].size()));
  return trie;
}

/// Smallest position p in [from, to) with values[p] >= bound, or `to`.
/// Exponential probing from `from`, then binary search in the bracket.
inline std::uint32_t gallop(std::span<const Value> values, std::uint32_t from, std::uint32_t to,
                            Value bound) {
  if (from >= to || values[from] >= bound) return from;
  std::uint32_t lo = from;  // values[lo] < bound
  std::uint32_t step = 1;
  std::uint32_t hi = from + step;
  while (hi < to && values[hi] < bound) {
    lo = hi;
    step *= 2;
    hi = (to - lo > step) ? lo + step : to;
  }
  if (hi > to) hi = to;
  // Invariant: values[lo] < bound, and hi == to or values[hi] >= bound.
  auto it = std::lower_bound(values.begin() + lo + 1, values.begin() + hi, bound);
  return static_cast<std::uint32_t>(it - values.begin());
}

/// Smallest child value >= `lower_bound` under `parent_node`, or nullopt.
inline std::optional<Value> seek_gallop(const LevelOrderTrie& trie, std::size_t level,
                                        std::uint32_t parent_node, Value lower_bound) {
  auto [lo, hi] = trie.children(level, parent_node);
  auto p = gallop(trie.values[level], lo, hi, lower_bound);
  if (p == hi) return std::nullopt;
  return trie.values[level][p];
}

}  // namespace joininfer
