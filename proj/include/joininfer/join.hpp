#pragma once

// Bag-level product kernels: the multiway (worst-case optimal) product over
// level-order tries, the pairwise fold baseline, and the index-keyed hash and
// sort-merge products used during the downward pass.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "joininfer/model.hpp"
#include "joininfer/storage.hpp"

namespace joininfer {

struct OpCounters {
  std::uint64_t seek_count = 0;
  std::uint64_t emit_count = 0;
  std::uint64_t backtrack_count = 0;
  // Pairwise kernel only: rows of the first binary product and the largest one.
  std::uint64_t first_intermediate = 0;
  std::uint64_t peak_intermediate = 0;

  OpCounters& operator+=(const OpCounters& o) {
    seek_count += o.seek_count;
    emit_count += o.emit_count;
    backtrack_count += o.backtrack_count;
    first_intermediate += o.first_intermediate;
    peak_intermediate = std::max(peak_intermediate, o.peak_intermediate);
    return *this;
  }
};

/// One factor of a bag query, stored as a trie whose level order follows the bag order.
struct BagFactor {
  FactorScope scope;  // in trie (bag) order
  LevelOrderTrie trie;
};

struct BagQuery {
  std::vector<Variable> bag_vars;
  std::vector<BagFactor> factors;
  std::vector<VarId> free_vars;
};

struct BagProduct {
  FactorTable product;   // over bag_vars, in bag order
  FactorTable marginal;  // product summed onto free_vars
  OpCounters counters;
};

namespace detail {

inline std::vector<VarId> ids_of(std::span<const Variable> vars) {
  std::vector<VarId> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.id);
  return out;
}

/// `factor`'s variables sorted by their position in `bag_vars`.
inline std::vector<VarId> bag_consistent_order(const FactorScope& scope,
                                               std::span<const Variable> bag_vars) {
  std::vector<std::pair<std::size_t, VarId>> ranked;
  for (const auto& v : scope) {
    auto it = std::find_if(bag_vars.begin(), bag_vars.end(),
                           [&](const Variable& b) { return b.id == v.id; });
    if (it == bag_vars.end())
      throw Error(Errc::InvalidArgument, "join",
                  "factor variable " + std::to_string(v.id) + " outside the bag");
    ranked.emplace_back(static_cast<std::size_t>(it - bag_vars.begin()), v.id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<VarId> out;
  for (auto& r : ranked) out.push_back(r.second);
  return out;
}

inline void check_covered(std::span<const Variable> bag_vars,
                          std::span<const FactorTable* const> factors) {
  for (const auto& v : bag_vars) {
    bool covered = std::any_of(factors.begin(), factors.end(),
                               [&](const FactorTable* f) { return f->scope().contains(v.id); });
    if (!covered)
      throw Error(Errc::InvalidArgument, "join",
                  "bag variable " + std::to_string(v.id) + " not covered by any factor");
  }
}

inline std::vector<const FactorTable*> pointers_to(std::span<const FactorTable> factors) {
  std::vector<const FactorTable*> out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back(&f);
  return out;
}

}  // namespace detail

/// Builds tries for `factors`, each ordered consistently with `bag_vars`.
inline BagQuery make_bag_query(std::vector<Variable> bag_vars,
                               std::span<const FactorTable* const> factors,
                               std::vector<VarId> free_vars) {
  detail::check_covered(bag_vars, factors);
  BagQuery q;
  q.factors.reserve(factors.size());
  for (const FactorTable* fp : factors) {
    const FactorTable& f = *fp;
    auto order = detail::bag_consistent_order(f.scope(), bag_vars);
    std::vector<Variable> vars;
    for (auto id : order) vars.push_back(f.scope()[*f.scope().position_of(id)]);
    q.factors.push_back({FactorScope(std::move(vars)), build_trie(f, order)});
  }
  q.bag_vars = std::move(bag_vars);
  q.free_vars = std::move(free_vars);
  return q;
}

inline BagQuery make_bag_query(std::vector<Variable> bag_vars,
                               std::span<const FactorTable> factors,
                               std::vector<VarId> free_vars) {
  const auto ptrs = detail::pointers_to(factors);
  return make_bag_query(std::move(bag_vars), ptrs, std::move(free_vars));
}

/// Multiway product of all factors in the bag by backtracking, variable at a
/// time, over the tries. For each variable the participating tries are
/// intersected leapfrog style: everyone gallops to the current maximum until
/// all agree (a match) or one runs out (backtrack). Output rows are produced
/// in lexicographic bag order.
inline BagProduct mult_fac_prod(const BagQuery& q, const Deadline* deadline = nullptr) {
  const std::size_t n = q.bag_vars.size();
  const std::size_t m = q.factors.size();

  struct Participant {
    std::size_t factor;
    std::size_t level;
  };
  std::vector<std::vector<Participant>> parts(n);
  for (std::size_t f = 0; f < m; ++f) {
    const auto& trie = q.factors[f].trie;
    std::size_t last = 0;
    for (std::size_t l = 0; l < trie.depth(); ++l) {
      auto it = std::find_if(q.bag_vars.begin(), q.bag_vars.end(),
                             [&](const Variable& b) { return b.id == trie.var_order[l]; });
      if (it == q.bag_vars.end())
        throw Error(Errc::InconsistentOrder, "join", "trie variable outside the bag");
      const auto k = static_cast<std::size_t>(it - q.bag_vars.begin());
      if (l > 0 && k <= last)
        throw Error(Errc::InconsistentOrder, "join", "trie levels not in bag order");
      last = k;
      parts[k].push_back({f, l});
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (parts[k].empty())
      throw Error(Errc::InvalidArgument, "join",
                  "bag variable " + std::to_string(q.bag_vars[k].id) + " not covered");

  BagProduct out;
  OpCounters& ctr = out.counters;
  std::vector<Value> flat;
  std::vector<double> probs;

  bool any_empty = false;
  for (const auto& bf : q.factors) any_empty = any_empty || bf.trie.leaves() == 0;

  std::vector<std::vector<std::uint32_t>> cursor(m);
  for (std::size_t f = 0; f < m; ++f) cursor[f].assign(q.factors[f].trie.depth(), 0);
  std::vector<Value> x(n, 0);

  struct Frame {
    std::vector<std::uint32_t> pos, hi;
    Value target = 0;
  };
  std::vector<Frame> frames(n);
  for (std::size_t k = 0; k < n; ++k) {
    frames[k].pos.resize(parts[k].size());
    frames[k].hi.resize(parts[k].size());
  }

  auto emit = [&] {
    double p = 1.0;
    for (std::size_t f = 0; f < m; ++f) {
      const auto& trie = q.factors[f].trie;
      const double leaf = trie.depth() == 0 ? trie.leaf_probs[0]
                                            : trie.leaf_probs[cursor[f][trie.depth() - 1]];
      p = f == 0 ? leaf : p * leaf;
    }
    flat.insert(flat.end(), x.begin(), x.end());
    probs.push_back(p);
    if ((++ctr.emit_count & 0xFFF) == 0 && deadline) deadline->check("join");
  };

  // Opens the child ranges of variable k under the current bindings.
  auto open = [&](std::size_t k) -> bool {
    auto& fr = frames[k];
    fr.target = 0;
    for (std::size_t i = 0; i < parts[k].size(); ++i) {
      const auto [f, l] = parts[k][i];
      const auto parent = l == 0 ? 0u : cursor[f][l - 1];
      auto [lo, hi] = q.factors[f].trie.children(l, parent);
      if (lo == hi) return false;
      fr.pos[i] = lo;
      fr.hi[i] = hi;
    }
    return true;
  };

  // Advances variable k to its next common value >= target; false when exhausted.
  auto next_match = [&](std::size_t k) -> bool {
    auto& fr = frames[k];
    const auto& pk = parts[k];
    Value target = fr.target;
    while (true) {
      Value lo_v = 0, hi_v = 0;
      for (std::size_t i = 0; i < pk.size(); ++i) {
        const auto& vals = q.factors[pk[i].factor].trie.values[pk[i].level];
        fr.pos[i] = gallop(vals, fr.pos[i], fr.hi[i], target);
        ++ctr.seek_count;
        if (fr.pos[i] == fr.hi[i]) return false;
        const Value v = vals[fr.pos[i]];
        if (i == 0 || v < lo_v) lo_v = v;
        if (i == 0 || v > hi_v) hi_v = v;
      }
      if (lo_v == hi_v) {
        x[k] = lo_v;
        for (std::size_t i = 0; i < pk.size(); ++i) cursor[pk[i].factor][pk[i].level] = fr.pos[i];
        fr.target = lo_v + 1;
        return true;
      }
      target = hi_v;
    }
  };

  if (!any_empty) {
    if (n == 0) {
      emit();
    } else {
      std::size_t k = 0;
      bool opened = open(0);
      if (!opened) ++ctr.backtrack_count;
      while (opened || k > 0) {
        if (opened && next_match(k)) {
          if (k + 1 == n) {
            emit();
            continue;  // stay on the last variable
          }
          ++k;
          opened = open(k);
          if (!opened) ++ctr.backtrack_count;
          continue;
        }
        if (opened) ++ctr.backtrack_count;
        if (k == 0) break;
        --k;
        opened = true;
      }
    }
  }

  out.product = FactorTable::from_sorted(FactorScope(q.bag_vars), std::move(flat), std::move(probs));
  out.marginal = marginalize(out.product, std::span<const VarId>(q.free_vars));
  return out;
}

/// Product of two listing factors joined on their shared variables. The result
/// scope is f's variables followed by g's remaining ones; rows stay sorted.
inline FactorTable binary_product(const FactorTable& f, const FactorTable& g) {
  std::vector<std::size_t> f_shared, g_shared, g_extra;
  std::vector<std::uint32_t> shared_cards;
  for (std::size_t j = 0; j < g.arity(); ++j) {
    auto p = f.scope().position_of(g.scope()[j].id);
    if (p) {
      f_shared.push_back(*p);
      g_shared.push_back(j);
      shared_cards.push_back(g.scope()[j].cardinality);
    } else {
      g_extra.push_back(j);
    }
  }
  radix_product(shared_cards);

  std::vector<Variable> vars(f.scope().begin(), f.scope().end());
  for (auto j : g_extra) vars.push_back(g.scope()[j]);
  std::unordered_map<Index, std::vector<std::uint32_t>> by_key;
  std::vector<Value> key(g_shared.size());
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    auto r = g.row(i);
    for (std::size_t s = 0; s < g_shared.size(); ++s) key[s] = r[g_shared[s]];
    by_key[encode_index_unchecked(key, shared_cards, Direction::Forward)].push_back(i);
  }

  std::vector<Value> flat;
  std::vector<double> probs;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto r = f.row(i);
    for (std::size_t s = 0; s < f_shared.size(); ++s) key[s] = r[f_shared[s]];
    auto it = by_key.find(encode_index_unchecked(key, shared_cards, Direction::Forward));
    if (it == by_key.end()) continue;
    for (auto gi : it->second) {
      auto gr = g.row(gi);
      flat.insert(flat.end(), r.begin(), r.end());
      for (auto j : g_extra) flat.push_back(gr[j]);
      probs.push_back(f.prob(i) * g.prob(gi));
    }
  }
  return FactorTable::from_sorted(FactorScope(std::move(vars)), std::move(flat), std::move(probs));
}

/// Left fold of binary products in input order, reordered to the bag order and
/// marginalized onto `free_vars`.
inline BagProduct pairwise_prod(const std::vector<Variable>& bag_vars,
                                std::span<const FactorTable* const> factors,
                                std::span<const VarId> free_vars,
                                const Deadline* deadline = nullptr) {
  detail::check_covered(bag_vars, factors);
  BagProduct out;
  if (factors.empty()) {
    out.product = FactorTable::scalar(1.0);
  } else {
    FactorTable acc = *factors[0];
    for (std::size_t i = 1; i < factors.size(); ++i) {
      if (deadline) deadline->check("join");
      acc = binary_product(acc, *factors[i]);
      if (i == 1) out.counters.first_intermediate = acc.size();
      out.counters.peak_intermediate =
          std::max<std::uint64_t>(out.counters.peak_intermediate, acc.size());
    }
    const auto order = detail::ids_of(bag_vars);
    if (acc.arity() != order.size())
      throw Error(Errc::InvalidArgument, "join", "factor variables outside the bag");
    out.product = permute(acc, order);
  }
  out.counters.emit_count = out.product.size();
  out.marginal = marginalize(out.product, free_vars);
  return out;
}

inline BagProduct pairwise_prod(const std::vector<Variable>& bag_vars,
                                std::span<const FactorTable> factors,
                                std::span<const VarId> free_vars,
                                const Deadline* deadline = nullptr) {
  const auto ptrs = detail::pointers_to(factors);
  return pairwise_prod(bag_vars, ptrs, free_vars, deadline);
}

enum class ProductOp { Multiply, Divide };

namespace detail {
inline double combine(double a, double b, ProductOp op) {
  return op == ProductOp::Multiply ? a * b : a / b;
}
}  // namespace detail

/// In-place product of an index/prob list with a hashed factor: entries whose
/// key misses the hash are dropped, the rest combine with the hashed value
/// (`iterated op hashed`). Linear in the list length.
inline void hash_product(const HashedFactor& hashed, std::vector<IndexedEntry>& iterated,
                         ProductOp op) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < iterated.size(); ++i) {
    const double* h = hashed.find(iterated[i].index);
    if (!h) continue;
    iterated[out] = {iterated[i].index, detail::combine(iterated[i].prob, *h, op)};
    ++out;
  }
  iterated.resize(out);
}

/// Same operation where the key of each table row is the index of its
/// projection onto `key_positions` (in the hashed factor's radix and direction).
inline void hash_product(const HashedFactor& hashed, FactorTable& table,
                         std::span<const std::size_t> key_positions, ProductOp op) {
  const auto& radix = hashed.radix();
  if (radix.size() != key_positions.size())
    throw Error(Errc::ArityMismatch, "join", "hash key arity mismatch");
  for (std::size_t j = 0; j < radix.size(); ++j)
    if (table.scope()[key_positions[j]].cardinality != radix[j])
      throw Error(Errc::ArityMismatch, "join", "hash key radix mismatch");
  std::vector<Value> key(key_positions.size());
  table.retain_transform([&](std::span<const Value> row, double& p) {
    for (std::size_t j = 0; j < key.size(); ++j) key[j] = row[key_positions[j]];
    const double* h = hashed.find(encode_index_unchecked(key, radix, hashed.direction()));
    if (!h) return false;
    p = detail::combine(p, *h, op);
    return true;
  });
}

/// Merge-intersection of two lists sorted by index; keys present in both
/// combine as `a op b`.
inline std::vector<IndexedEntry> sort_merge_product(std::span<const IndexedEntry> a,
                                                    std::span<const IndexedEntry> b,
                                                    ProductOp op) {
  auto strictly_sorted = [](std::span<const IndexedEntry> s) {
    for (std::size_t i = 1; i < s.size(); ++i)
      if (!(s[i - 1].index < s[i].index)) return false;
    return true;
  };
  if (!strictly_sorted(a) || !strictly_sorted(b))
    throw Error(Errc::UnsortedInput, "join", "sort-merge operands must be sorted by index");
  std::vector<IndexedEntry> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].index < b[j].index) {
      ++i;
    } else if (b[j].index < a[i].index) {
      ++j;
    } else {
      out.push_back({a[i].index, detail::combine(a[i].prob, b[j].prob, op)});
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace joininfer
