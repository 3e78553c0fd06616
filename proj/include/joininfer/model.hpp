#pragma once

// Domain types for discrete graphical models and the pure factor algebra
// (marginalization, 01-projection, reordering) that everything else builds on.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "joininfer/error.hpp"

namespace joininfer {

using VarId = std::uint32_t;
using Value = std::uint32_t;

struct Variable {
  VarId id = 0;
  std::uint32_t cardinality = 1;

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Ordered list of distinct variables. The empty scope belongs to scalar factors.
class FactorScope {
 public:
  FactorScope() = default;

  explicit FactorScope(std::vector<Variable> vars) : vars_(std::move(vars)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i].cardinality == 0)
        throw Error(Errc::ValueOutOfRange, "model",
                    "variable " + std::to_string(vars_[i].id) + " has cardinality 0");
      for (std::size_t j = 0; j < i; ++j)
        if (vars_[j].id == vars_[i].id)
          throw Error(Errc::DuplicateVariable, "model",
                      "variable " + std::to_string(vars_[i].id) + " repeated in scope");
    }
  }

  std::size_t size() const noexcept { return vars_.size(); }
  bool empty() const noexcept { return vars_.empty(); }
  const Variable& operator[](std::size_t i) const { return vars_[i]; }
  auto begin() const noexcept { return vars_.begin(); }
  auto end() const noexcept { return vars_.end(); }
  const std::vector<Variable>& variables() const noexcept { return vars_; }

  std::vector<VarId> ids() const {
    std::vector<VarId> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(v.id);
    return out;
  }

  std::vector<std::uint32_t> cardinalities() const {
    std::vector<std::uint32_t> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(v.cardinality);
    return out;
  }

  std::optional<std::size_t> position_of(VarId id) const noexcept {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].id == id) return i;
    return std::nullopt;
  }

  bool contains(VarId id) const noexcept { return position_of(id).has_value(); }

  /// Product of cardinalities as a double (it may exceed 2^64).
  double domain_size() const noexcept {
    double d = 1.0;
    for (const auto& v : vars_) d *= static_cast<double>(v.cardinality);
    return d;
  }

  friend bool operator==(const FactorScope&, const FactorScope&) = default;

 private:
  std::vector<Variable> vars_;
};

/// Sparse factor in listing representation: only strictly positive entries are
/// stored, rows sorted lexicographically under the scope order, no duplicates.
class FactorTable {
 public:
  /// Scalar factor with value 1.
  FactorTable() : probs_{1.0} {}

  /// Trusted constructor for rows already sorted, unique, positive and in range.
  static FactorTable from_sorted(FactorScope scope, std::vector<Value> values,
                                 std::vector<double> probs) {
    FactorTable t;
    t.scope_ = std::move(scope);
    t.values_ = std::move(values);
    t.probs_ = std::move(probs);
    return t;
  }

  /// Scalar factor holding `value` (no rows if value is zero).
  static FactorTable scalar(double value) {
    FactorTable t;
    t.probs_.clear();
    if (value > 0.0) t.probs_.push_back(value);
    return t;
  }

  /// Full table over `scope` with every entry equal to `value` (> 0).
  static FactorTable constant(FactorScope scope, double value = 1.0) {
    const auto cards = scope.cardinalities();
    std::vector<Value> values;
    std::vector<double> probs;
    std::vector<Value> tuple(cards.size(), 0);
    const auto total = static_cast<std::size_t>(scope.domain_size());
    values.reserve(total * cards.size());
    probs.assign(total, value);
    for (std::size_t n = 0; n < total; ++n) {
      values.insert(values.end(), tuple.begin(), tuple.end());
      for (std::size_t i = cards.size(); i-- > 0;) {
        if (++tuple[i] < cards[i]) break;
        tuple[i] = 0;
      }
    }
    return from_sorted(std::move(scope), std::move(values), std::move(probs));
  }

  const FactorScope& scope() const noexcept { return scope_; }
  std::size_t arity() const noexcept { return scope_.size(); }
  std::size_t size() const noexcept { return probs_.size(); }
  bool empty() const noexcept { return probs_.empty(); }

  std::span<const Value> row(std::size_t i) const {
    return {values_.data() + i * arity(), arity()};
  }
  double prob(std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const Value> values() const noexcept { return values_; }

  double total() const noexcept {
    double s = 0.0;
    for (double p : probs_) s += p;
    return s;
  }

  /// Probability of `tuple`, 0 if absent. Binary search over the sorted rows.
  double lookup(std::span<const Value> tuple) const {
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const auto r = row(mid);
      if (std::lexicographical_compare(r.begin(), r.end(), tuple.begin(), tuple.end()))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < size() && std::ranges::equal(row(lo), tuple)) return probs_[lo];
    return 0.0;
  }

  /// In-place filter/update: `fn(row, prob&)` returns false to drop the row.
  /// Relative row order is preserved, so the table stays sorted.
  template <class Fn>
  void retain_transform(Fn&& fn) {
    const std::size_t k = arity();
    std::size_t out = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      double p = probs_[i];
      if (!fn(row(i), p) || !(p > 0.0)) continue;
      if (out != i)
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(i * k), k,
                    values_.begin() + static_cast<std::ptrdiff_t>(out * k));
      probs_[out++] = p;
    }
    values_.resize(out * k);
    probs_.resize(out);
  }

  void scale(double factor) {
    for (double& p : probs_) p *= factor;
  }

  friend bool operator==(const FactorTable&, const FactorTable&) = default;

 private:
  FactorScope scope_;
  std::vector<Value> values_;
  std::vector<double> probs_;
};

struct FactorEntry {
  std::vector<Value> tuple;
  double prob = 0.0;
};

namespace detail {

inline bool row_less(std::span<const Value> a, std::span<const Value> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Positions of `ids` inside `scope`; throws KeepNotSubset when one is missing.
inline std::vector<std::size_t> positions_in(const FactorScope& scope,
                                             std::span<const VarId> ids) {
  std::vector<std::size_t> pos;
  pos.reserve(ids.size());
  for (VarId id : ids) {
    auto p = scope.position_of(id);
    if (!p)
      throw Error(Errc::KeepNotSubset, "model",
                  "variable " + std::to_string(id) + " not in factor scope");
    pos.push_back(*p);
  }
  return pos;
}

inline FactorScope sub_scope(const FactorScope& scope, std::span<const std::size_t> pos) {
  std::vector<Variable> vars;
  vars.reserve(pos.size());
  for (auto p : pos) vars.push_back(scope[p]);
  return FactorScope(std::move(vars));
}

/// Sorts (tuple, prob) rows given as parallel flat arrays; rows must be unique.
inline void sort_rows(std::size_t arity, std::vector<Value>& values, std::vector<double>& probs) {
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row_of = [&](std::size_t i) {
    return std::span<const Value>(values.data() + i * arity, arity);
  };
  if (std::is_sorted(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row_less(row_of(a), row_of(b));
      }))
    return;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return row_less(row_of(a), row_of(b)); });
  std::vector<Value> v2;
  std::vector<double> p2;
  v2.reserve(values.size());
  p2.reserve(n);
  for (auto i : order) {
    auto r = row_of(i);
    v2.insert(v2.end(), r.begin(), r.end());
    p2.push_back(probs[i]);
  }
  values = std::move(v2);
  probs = std::move(p2);
}

/// Group-and-sum rows of `f` projected on `pos`. Sums run in row order for each
/// group, so results do not depend on the grouping strategy used.
inline FactorTable project_sum(const FactorTable& f, std::span<const std::size_t> pos,
                               bool indicator) {
  FactorScope out_scope = sub_scope(f.scope(), pos);
  const std::size_t k = pos.size();
  std::vector<Value> values;
  std::vector<double> probs;
  if (f.empty()) return FactorTable::from_sorted(std::move(out_scope), {}, {});
  if (k == 0) {
    return FactorTable::from_sorted(std::move(out_scope), {},
                                    {indicator ? 1.0 : f.total()});
  }

  // Prefix projections keep rows grouped; a linear scan suffices.
  bool prefix = true;
  for (std::size_t i = 0; i < k; ++i) prefix = prefix && pos[i] == i;
  if (prefix) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto r = f.row(i);
      bool same = !probs.empty() &&
                  std::equal(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k),
                             values.end() - static_cast<std::ptrdiff_t>(k));
      if (same) {
        if (!indicator) probs.back() += f.prob(i);
      } else {
        values.insert(values.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k));
        probs.push_back(indicator ? 1.0 : f.prob(i));
      }
    }
    return FactorTable::from_sorted(std::move(out_scope), std::move(values), std::move(probs));
  }

  // Mixed-radix key (first projected variable most significant) when it fits.
  const auto cards = out_scope.cardinalities();
  bool fits = true;
  std::uint64_t radix = 1;
  for (auto c : cards) {
    if (radix > std::numeric_limits<std::uint64_t>::max() / c) {
      fits = false;
      break;
    }
    radix *= c;
  }
  if (fits) {
    std::unordered_map<std::uint64_t, double> acc;
    acc.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto r = f.row(i);
      std::uint64_t key = 0;
      for (std::size_t j = 0; j < k; ++j) key = key * cards[j] + r[pos[j]];
      auto [it, inserted] = acc.try_emplace(key, indicator ? 1.0 : f.prob(i));
      if (!inserted && !indicator) it->second += f.prob(i);
    }
    std::vector<std::pair<std::uint64_t, double>> sorted(acc.begin(), acc.end());
    std::sort(sorted.begin(), sorted.end());
    values.resize(sorted.size() * k);
    probs.reserve(sorted.size());
    for (std::size_t n = 0; n < sorted.size(); ++n) {
      std::uint64_t key = sorted[n].first;
      for (std::size_t j = k; j-- > 0;) {
        values[n * k + j] = static_cast<Value>(key % cards[j]);
        key /= cards[j];
      }
      probs.push_back(sorted[n].second);
    }
    return FactorTable::from_sorted(std::move(out_scope), std::move(values), std::move(probs));
  }

  std::vector<Value> projected(f.size() * k);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto r = f.row(i);
    for (std::size_t j = 0; j < k; ++j) projected[i * k + j] = r[pos[j]];
  }
  auto prow = [&](std::size_t i) { return std::span<const Value>(projected.data() + i * k, k); };
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row_less(prow(a), prow(b)); });
  for (auto i : order) {
    auto r = prow(i);
    if (!probs.empty() &&
        std::equal(r.begin(), r.end(), values.end() - static_cast<std::ptrdiff_t>(k))) {
      if (!indicator) probs.back() += f.prob(i);
    } else {
      values.insert(values.end(), r.begin(), r.end());
      probs.push_back(indicator ? 1.0 : f.prob(i));
    }
  }
  return FactorTable::from_sorted(std::move(out_scope), std::move(values), std::move(probs));
}

}  // namespace detail

/// Builds a listing-representation factor. Zero entries are dropped; duplicates,
/// out-of-range values and negative (or NaN) probabilities are rejected.
inline FactorTable make_factor(FactorScope scope, std::span<const FactorEntry> entries) {
  const std::size_t k = scope.size();
  std::vector<Value> values;
  std::vector<double> probs;
  values.reserve(entries.size() * k);
  probs.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.tuple.size() != k)
      throw Error(Errc::ArityMismatch, "model",
                  "tuple of length " + std::to_string(e.tuple.size()) + " for scope of arity " +
                      std::to_string(k));
    for (std::size_t j = 0; j < k; ++j)
      if (e.tuple[j] >= scope[j].cardinality)
        throw Error(Errc::ValueOutOfRange, "model",
                    "value " + std::to_string(e.tuple[j]) + " for variable " +
                        std::to_string(scope[j].id));
    if (!(e.prob >= 0.0))
      throw Error(Errc::NegativeProbability, "model", "probability " + std::to_string(e.prob));
    values.insert(values.end(), e.tuple.begin(), e.tuple.end());
    probs.push_back(e.prob);
  }
  detail::sort_rows(k, values, probs);
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (std::equal(values.begin() + static_cast<std::ptrdiff_t>((i - 1) * k),
                   values.begin() + static_cast<std::ptrdiff_t>(i * k),
                   values.begin() + static_cast<std::ptrdiff_t>(i * k)))
      throw Error(Errc::DuplicateTuple, "model", "duplicate tuple in factor");
  }
  if (k == 0 && probs.size() > 1) throw Error(Errc::DuplicateTuple, "model", "scalar repeated");
  auto t = FactorTable::from_sorted(std::move(scope), std::move(values), std::move(probs));
  t.retain_transform([](std::span<const Value>, double& p) { return p > 0.0; });
  return t;
}

inline FactorTable make_factor(FactorScope scope, std::initializer_list<FactorEntry> entries) {
  return make_factor(std::move(scope), std::span<const FactorEntry>(entries.begin(), entries.size()));
}

/// Support size divided by the full domain product.
inline double factor_sparsity(const FactorTable& f) {
  return static_cast<double>(f.size()) / f.scope().domain_size();
}

/// Sums out every variable not in `keep`; the result follows `keep`'s order.
inline FactorTable marginalize(const FactorTable& f, std::span<const VarId> keep) {
  const auto pos = detail::positions_in(f.scope(), keep);
  return detail::project_sum(f, pos, false);
}

inline FactorTable marginalize(const FactorTable& f, const FactorScope& keep) {
  const auto ids = keep.ids();
  for (const auto& v : keep) {
    auto p = f.scope().position_of(v.id);
    if (p && f.scope()[*p].cardinality != v.cardinality)
      throw Error(Errc::KeepNotSubset, "model", "cardinality mismatch");
  }
  return marginalize(f, std::span<const VarId>(ids));
}

/// {0,1}-valued support indicator of `f` projected onto scope(f) ∩ `onto`.
/// The result keeps `f`'s variable order.
inline FactorTable zero_one_projection(const FactorTable& f, std::span<const VarId> onto) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < f.arity(); ++i)
    if (std::find(onto.begin(), onto.end(), f.scope()[i].id) != onto.end()) pos.push_back(i);
  if (pos.empty()) throw Error(Errc::EmptyIntersection, "model", "projection target disjoint");
  return detail::project_sum(f, pos, true);
}

/// Same factor with its scope permuted to `order` (a permutation of the scope ids).
inline FactorTable permute(const FactorTable& f, std::span<const VarId> order) {
  if (order.size() != f.arity())
    throw Error(Errc::KeepNotSubset, "model", "permutation arity mismatch");
  if (std::ranges::equal(order, f.scope().ids())) return f;
  const auto pos = detail::positions_in(f.scope(), order);
  const std::size_t k = pos.size();
  std::vector<Value> values(f.size() * k);
  std::vector<double> probs(f.probs().begin(), f.probs().end());
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto r = f.row(i);
    for (std::size_t j = 0; j < k; ++j) values[i * k + j] = r[pos[j]];
  }
  detail::sort_rows(k, values, probs);
  return FactorTable::from_sorted(detail::sub_scope(f.scope(), pos), std::move(values),
                                  std::move(probs));
}

/// A discrete model: variables with dense ids 0..n-1 and nonnegative factors.
struct Pgm {
  std::vector<Variable> variables;
  std::vector<FactorTable> factors;
  /// Id of each variable in the model this one was derived from (identity for
  /// freshly loaded models; evidence removal renumbers).
  std::vector<VarId> source_ids;
  /// Product of scalar factors folded away by conditioning.
  double constant = 1.0;

  static Pgm make(std::span<const std::uint32_t> cardinalities, std::vector<FactorTable> factors) {
    Pgm p;
    for (std::size_t i = 0; i < cardinalities.size(); ++i) {
      p.variables.push_back({static_cast<VarId>(i), cardinalities[i]});
      p.source_ids.push_back(static_cast<VarId>(i));
    }
    p.factors = std::move(factors);
    p.validate();
    return p;
  }

  std::size_t num_variables() const noexcept { return variables.size(); }
  std::uint32_t cardinality(VarId v) const { return variables[v].cardinality; }

  Variable var(VarId v) const { return variables[v]; }

  FactorScope scope_of(std::span<const VarId> ids) const {
    std::vector<Variable> vars;
    vars.reserve(ids.size());
    for (auto id : ids) vars.push_back(variables.at(id));
    return FactorScope(std::move(vars));
  }

  void validate() const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i].id != i)
        throw Error(Errc::InvalidArgument, "model", "variable ids must be dense 0..n-1");
      if (variables[i].cardinality == 0)
        throw Error(Errc::ValueOutOfRange, "model", "zero cardinality");
    }
    if (source_ids.size() != variables.size())
      throw Error(Errc::InvalidArgument, "model", "source id map size mismatch");
    for (const auto& f : factors)
      for (const auto& v : f.scope()) {
        if (v.id >= variables.size())
          throw Error(Errc::ValueOutOfRange, "model",
                      "factor refers to unknown variable " + std::to_string(v.id));
        if (variables[v.id].cardinality != v.cardinality)
          throw Error(Errc::ValueOutOfRange, "model",
                      "cardinality mismatch for variable " + std::to_string(v.id));
      }
  }

  friend bool operator==(const Pgm&, const Pgm&) = default;
};

/// Normalized query answers: one distribution per variable (indexed by value),
/// one normalized factor per model factor, and log Z including `Pgm::constant`.
struct Marginals {
  std::vector<std::vector<double>> variables;
  std::vector<FactorTable> factors;
  double log_partition = 0.0;
};

}  // namespace joininfer
