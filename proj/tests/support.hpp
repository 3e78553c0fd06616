#pragma once

// Random model generators and comparison helpers shared by the test suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "joininfer/joininfer.hpp"

namespace jtest {

using namespace joininfer;

struct ModelShape {
  std::size_t min_vars = 2;
  std::size_t max_vars = 12;
  std::uint32_t max_card = 4;
  std::size_t max_arity = 3;
  double min_sparsity = 0.2;
  double max_sparsity = 1.0;
  bool loopy = true;
  /// Cap on the joint state space so the enumeration oracle applies.
  double max_states = 1e7;
};

inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Factor over `scope` keeping about `sparsity` of its domain, always
/// containing `planted` (the planted tuple keeps the model satisfiable).
inline FactorTable random_factor(std::mt19937_64& rng, const FactorScope& scope, double sparsity,
                                 const std::vector<Value>* planted = nullptr) {
  const auto cards = scope.cardinalities();
  const auto total = static_cast<std::size_t>(scope.domain_size());
  std::vector<FactorEntry> entries;
  std::vector<Value> tuple(cards.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    const bool forced = planted && tuple == *planted;
    if (forced || uniform_real(rng, 0.0, 1.0) < sparsity)
      entries.push_back({tuple, uniform_real(rng, 0.05, 1.0)});
    for (std::size_t i = cards.size(); i-- > 0;) {
      if (++tuple[i] < cards[i]) break;
      tuple[i] = 0;
    }
  }
  return make_factor(scope, entries);
}

/// Random satisfiable model: a spanning tree of pairwise factors, unary
/// factors, and (when loopy) extra factors of arity up to `max_arity`. Every
/// factor contains the projection of one hidden assignment, returned in
/// `hidden` when requested.
inline Pgm random_model(std::mt19937_64& rng, const ModelShape& shape = {},
                        std::vector<Value>* hidden = nullptr) {
  const std::size_t n = uniform(rng, shape.min_vars, shape.max_vars);
  std::vector<std::uint32_t> cards(n);
  for (auto& c : cards) c = static_cast<std::uint32_t>(uniform(rng, 2, shape.max_card));
  for (;;) {
    double states = 1.0;
    for (auto c : cards) states *= c;
    if (states <= shape.max_states) break;
    *std::max_element(cards.begin(), cards.end()) -= 1;
  }
  std::vector<Value> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<Value>(uniform(rng, 0, cards[i] - 1));

  std::vector<std::vector<VarId>> scopes;
  for (std::size_t i = 1; i < n; ++i)
    scopes.push_back({static_cast<VarId>(uniform(rng, 0, i - 1)), static_cast<VarId>(i)});
  for (std::size_t i = 0; i < n; ++i)
    if (uniform(rng, 0, 2) == 0) scopes.push_back({static_cast<VarId>(i)});
  if (shape.loopy) {
    const std::size_t extra = uniform(rng, 1, std::max<std::size_t>(1, n / 2));
    for (std::size_t e = 0; e < extra; ++e) {
      const std::size_t arity = uniform(rng, 2, std::min(shape.max_arity, n));
      std::vector<VarId> s;
      while (s.size() < arity) {
        const auto x = static_cast<VarId>(uniform(rng, 0, n - 1));
        if (std::find(s.begin(), s.end(), x) == s.end()) s.push_back(x);
      }
      scopes.push_back(std::move(s));
    }
  }
  if (n == 1) scopes.push_back({0});

  std::vector<FactorTable> factors;
  for (const auto& s : scopes) {
    std::vector<Variable> vars;
    std::vector<Value> planted;
    for (auto x : s) {
      vars.push_back({x, cards[x]});
      planted.push_back(a[x]);
    }
    const double sparsity = uniform_real(rng, shape.min_sparsity, shape.max_sparsity);
    factors.push_back(random_factor(rng, FactorScope(std::move(vars)), sparsity, &planted));
  }
  if (hidden) *hidden = a;
  return Pgm::make(cards, std::move(factors));
}

/// Evidence on a random subset of variables taken from `hidden`.
inline Evidence random_evidence(std::mt19937_64& rng, const std::vector<Value>& hidden,
                                std::size_t count) {
  Evidence ev;
  std::vector<VarId> ids(hidden.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<VarId>(i);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < std::min(count, ids.size()); ++i)
    ev.assignments.emplace(ids[i], hidden[ids[i]]);
  return ev;
}

inline double max_abs_diff(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return INFINITY;
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  }
  return d;
}

/// Largest entrywise difference between two factors over the union of supports.
inline double factor_diff(const FactorTable& a, const FactorTable& b) {
  if (a.scope() != b.scope()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.prob(i) - b.lookup(a.row(i))));
  for (std::size_t i = 0; i < b.size(); ++i) d = std::max(d, std::abs(b.prob(i) - a.lookup(b.row(i))));
  return d;
}

inline FactorScope scope_of(std::initializer_list<std::pair<VarId, std::uint32_t>> vars) {
  std::vector<Variable> v;
  for (auto [id, c] : vars) v.push_back({id, c});
  return FactorScope(std::move(v));
}

/// Product of factors over the whole model (small models only), for checks.
inline FactorTable joint_of(const Pgm& pgm) {
  FactorTable acc = FactorTable::scalar(1.0);
  for (const auto& f : pgm.factors) acc = binary_product(acc, f);
  return acc;
}

/// Sparse triangle A-B, B-C, C-A with exactly `n` tuples per factor: a dense
/// s x s block (s = floor(sqrt(n/2))) that closes s^3 triangles, plus star
/// tuples around hub value s that join pairwise in ~(n/2)^2 ways but close no
/// triangle. Factor order is (AB, CA, BC) so a left fold forms AB x CA first.
inline std::vector<FactorTable> sparse_triangle(std::size_t n) {
  const auto s = static_cast<Value>(std::floor(std::sqrt(static_cast<double>(n) / 2.0)));
  const std::size_t star = n - static_cast<std::size_t>(s) * s;
  const auto card = static_cast<std::uint32_t>(s + 2 * n + 1);
  std::vector<FactorEntry> ab, ca, bc;
  for (Value x = 0; x < s; ++x)
    for (Value y = 0; y < s; ++y) {
      ab.push_back({{x, y}, 1.0});
      ca.push_back({{y, x}, 1.0});
      bc.push_back({{x, y}, 1.0});
    }
  for (std::size_t i = 0; i < star; ++i) {
    const auto v = static_cast<Value>(s + i);
    ab.push_back({{s, v}, 1.0});                                  // a = hub
    ca.push_back({{v, s}, 1.0});                                  // a = hub
    bc.push_back({{s, static_cast<Value>(s + n + i)}, 1.0});      // c never in CA
  }
  return {make_factor(scope_of({{0, card}, {1, card}}), ab),
          make_factor(scope_of({{2, card}, {0, card}}), ca),
          make_factor(scope_of({{1, card}, {2, card}}), bc)};
}

}  // namespace jtest
