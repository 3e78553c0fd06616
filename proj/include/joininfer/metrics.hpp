#pragma once

// Cost predictors comparing join-based bag products to dense truth tables.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "joininfer/decomposition.hpp"

namespace joininfer {

/// Σ over bags of the product of member cardinalities (floating point).
inline double compute_rho(const Ghd& g, const Pgm& pgm) {
  double rho = 0.0;
  for (const auto& bag : g.chi) {
    double prod = 1.0;
    for (auto x : bag) prod *= pgm.cardinality(x);
    rho += prod;
  }
  return rho;
}

struct SizedEdge {
  std::vector<VarId> vars;
  double size = 0.0;  // support size |φ_S|
};

/// AGM bound of a bag: Π |φ_S|^{x*_S}, with x* the optimal cover weighted by
/// log2 |φ_S|. Zero when an edge touching the bag is empty.
inline double agm_bound_bag(std::span<const VarId> bag, std::span<const SizedEdge> edges) {
  std::vector<CoverEdge> cover;
  cover.reserve(edges.size());
  for (const auto& e : edges) {
    const bool touches = std::any_of(bag.begin(), bag.end(), [&](VarId x) {
      return std::find(e.vars.begin(), e.vars.end(), x) != e.vars.end();
    });
    if (touches && e.size <= 0.0) return 0.0;
    cover.push_back({e.vars, e.size > 0.0 ? std::log2(e.size) : 0.0});
  }
  return std::exp2(fractional_cover(bag, cover).objective);
}

/// Edges of the model with their support sizes (singleton domain edges for
/// variables no factor mentions).
inline std::vector<SizedEdge> sized_model_edges(const Pgm& pgm) {
  std::vector<SizedEdge> out;
  std::vector<char> seen(pgm.num_variables(), 0);
  for (const auto& f : pgm.factors) {
    out.push_back({f.scope().ids(), static_cast<double>(f.size())});
    for (const auto& v : f.scope()) seen[v.id] = 1;
  }
  for (VarId x = 0; x < pgm.num_variables(); ++x)
    if (!seen[x]) out.push_back({{x}, static_cast<double>(pgm.cardinality(x))});
  return out;
}

inline std::vector<double> bag_agm_bounds(const Ghd& g, const Pgm& pgm) {
  const auto edges = sized_model_edges(pgm);
  std::vector<double> out;
  out.reserve(g.size());
  for (const auto& bag : g.chi) out.push_back(agm_bound_bag(bag, edges));
  return out;
}

/// Σ_v AGM(χ(v)) / ρ.
inline double compute_RJ(const Ghd& g, const Pgm& pgm) {
  const auto agm = bag_agm_bounds(g, pgm);
  double num = 0.0;
  for (double a : agm) num += a;
  return num / compute_rho(g, pgm);
}

/// N^fhtw / D^tw with N the largest factor support and D the largest cardinality.
inline double compute_RD(const Pgm& pgm, const Widths& w) {
  double n_max = 0.0, d_max = 1.0;
  for (const auto& f : pgm.factors) n_max = std::max(n_max, static_cast<double>(f.size()));
  for (const auto& v : pgm.variables) d_max = std::max(d_max, static_cast<double>(v.cardinality));
  return std::pow(n_max, w.fhtw) / std::pow(d_max, static_cast<double>(w.tw));
}

inline double compute_RD(const Ghd& g, const Pgm& pgm) {
  return compute_RD(pgm, compute_widths(g, pgm));
}

}  // namespace joininfer
