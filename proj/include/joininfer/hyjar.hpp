#pragma once

// Hybrid strategy selection. Below the truth-table budget each bag with
// assigned factors times the three kernels on those factors alone and the
// fastest choice is inherited by its unassigned descendants; above it the
// multiway kernels are drawn at random.

#include <algorithm>
#include <array>
#include <chrono>
#include <random>
#include <vector>

#include "joininfer/metrics.hpp"
#include "joininfer/propagation.hpp"

namespace joininfer {

struct HyjarOptions {
  double rho_threshold = 1e9;
  /// Timed runs per kernel; the median is compared.
  unsigned trials = 1;
  double projection_density_threshold = 0.9;
  const Deadline* deadline = nullptr;
};

struct HyjarReport {
  StrategyMap strategies;
  bool random_branch = false;
  /// Median seconds per kernel for each timed bag (empty for untimed bags).
  std::vector<std::vector<double>> timings;
};

namespace detail {

template <class Fn>
double median_seconds(unsigned trials, Fn&& fn) {
  std::vector<double> t;
  for (unsigned i = 0; i < std::max(1u, trials); ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

/// Times the three kernels on the factors assigned to bag `v`, restricted to
/// the bag variables those factors mention. Trie construction is not timed.
inline std::vector<double> time_bag(const Ghd& g, const Pgm& pgm, std::size_t v,
                                    const HyjarOptions& opt) {
  std::vector<const FactorTable*> assigned;
  for (auto f : g.alpha[v]) assigned.push_back(&pgm.factors[f]);
  std::vector<Variable> vars;
  std::vector<VarId> ids;
  for (auto x : g.chi[v])
    if (std::any_of(assigned.begin(), assigned.end(),
                    [&](const FactorTable* f) { return f->scope().contains(x); })) {
      vars.push_back(pgm.var(x));
      ids.push_back(x);
    }
  std::vector<VarId> free;
  for (auto x : (g.is_root(v) ? g.chi[v] : g.separator(v)))
    if (std::find(ids.begin(), ids.end(), x) != ids.end()) free.push_back(x);

  std::vector<FactorTable> projections;
  const auto& own = g.alpha[v];
  for (std::size_t f = 0; f < pgm.factors.size(); ++f) {
    if (std::find(own.begin(), own.end(), f) != own.end()) continue;
    std::vector<VarId> common;
    for (const auto& var : pgm.factors[f].scope())
      if (std::find(ids.begin(), ids.end(), var.id) != ids.end()) common.push_back(var.id);
    if (common.empty()) continue;
    auto proj = zero_one_projection(pgm.factors[f], common);
    if (factor_sparsity(proj) <= opt.projection_density_threshold)
      projections.push_back(std::move(proj));
  }
  std::vector<const FactorTable*> with_proj = assigned;
  for (const auto& p : projections) with_proj.push_back(&p);

  const auto q0 = make_bag_query(vars, assigned, free);
  const auto q1 = make_bag_query(vars, with_proj, free);
  std::vector<double> out(3);
  out[0] = median_seconds(opt.trials, [&] { mult_fac_prod(q0, opt.deadline); });
  out[1] = median_seconds(opt.trials, [&] { mult_fac_prod(q1, opt.deadline); });
  out[2] = median_seconds(opt.trials, [&] { pairwise_prod(vars, assigned, free, opt.deadline); });
  return out;
}

}  // namespace detail

inline HyjarReport hyjar_select(const Ghd& g, const Pgm& pgm, double rho, std::uint64_t seed,
                                const HyjarOptions& opt = {}) {
  HyjarReport rep;
  const std::size_t k = g.size();
  rep.strategies.assign(k, Strategy::Multiway);
  rep.timings.assign(k, {});
  if (k == 0) return rep;

  if (rho > opt.rho_threshold) {
    rep.random_branch = true;
    std::mt19937_64 rng(seed);
    for (std::size_t v = 0; v < k; ++v)
      rep.strategies[v] = (rng() >> 63) ? Strategy::Multiway01 : Strategy::Multiway;
    return rep;
  }

  std::vector<std::size_t> visit;
  for (std::size_t v = 0; v < k; ++v)
    if (!g.alpha[v].empty()) visit.push_back(v);
  std::vector<double> domain(k, 1.0);
  for (std::size_t v = 0; v < k; ++v)
    for (auto x : g.chi[v]) domain[v] *= pgm.cardinality(x);
  std::stable_sort(visit.begin(), visit.end(),
                   [&](std::size_t a, std::size_t b) { return domain[a] > domain[b]; });

  std::vector<char> assigned(k, 0);
  auto spread = [&](std::size_t v) {
    for (auto w : g.subtree(v))
      if (!assigned[w]) {
        rep.strategies[w] = rep.strategies[v];
        assigned[w] = 1;
      }
  };
  for (auto v : visit) {
    if (opt.deadline) opt.deadline->check("hyjar");
    rep.timings[v] = detail::time_bag(g, pgm, v, opt);
    const auto best = std::min_element(rep.timings[v].begin(), rep.timings[v].end());
    rep.strategies[v] = static_cast<Strategy>(best - rep.timings[v].begin());
    assigned[v] = 1;
    spread(v);
  }
  // An untimed root keeps the default multiway kernel and passes it on.
  assigned[g.root] = 1;
  spread(g.root);
  return rep;
}

inline StrategyMap select_strategies(const Ghd& g, const Pgm& pgm, double rho, std::uint64_t seed,
                                     const HyjarOptions& opt = {}) {
  return hyjar_select(g, pgm, rho, seed, opt).strategies;
}

}  // namespace joininfer
