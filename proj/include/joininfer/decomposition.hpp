#pragma once

// Tree decompositions: MinFill elimination, junction-tree construction with
// edge labels and factor assignment, fractional edge covers and widths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "joininfer/model.hpp"
#include "joininfer/simplex.hpp"

namespace joininfer {

/// Rooted decomposition. Bags are numbered 0..size()-1; `parent[root] == root`.
/// Each bag lists its variables ordered by elimination position, so every
/// separator appears in the same relative order in parent and child.
struct Ghd {
  std::vector<std::size_t> parent;
  std::vector<std::vector<VarId>> chi;
  std::vector<std::vector<std::size_t>> lambda;  // factor ids labelling each bag
  std::vector<std::vector<std::size_t>> alpha;   // factor ids assigned to each bag
  std::vector<std::size_t> elimination_position;
  std::size_t root = 0;

  std::size_t size() const noexcept { return chi.size(); }
  bool is_root(std::size_t v) const { return v == root; }

  std::vector<std::vector<std::size_t>> children() const {
    std::vector<std::vector<std::size_t>> out(size());
    for (std::size_t v = 0; v < size(); ++v)
      if (v != root) out[parent[v]].push_back(v);
    return out;
  }

  /// Breadth-first order from the root (level order, root first).
  std::vector<std::size_t> top_down() const {
    std::vector<std::size_t> order;
    if (chi.empty()) return order;
    const auto kids = children();
    order.push_back(root);
    for (std::size_t i = 0; i < order.size(); ++i)
      for (auto c : kids[order[i]]) order.push_back(c);
    return order;
  }

  /// Deepest level first, root last.
  std::vector<std::size_t> bottom_up() const {
    auto order = top_down();
    std::reverse(order.begin(), order.end());
    return order;
  }

  std::vector<std::size_t> depths() const {
    std::vector<std::size_t> d(size(), 0);
    for (auto v : top_down())
      if (v != root) d[v] = d[parent[v]] + 1;
    return d;
  }

  std::vector<std::size_t> subtree(std::size_t v) const {
    const auto kids = children();
    std::vector<std::size_t> out{v};
    for (std::size_t i = 0; i < out.size(); ++i)
      for (auto c : kids[out[i]]) out.push_back(c);
    return out;
  }

  /// χ(v) ∩ χ(parent(v)) in bag order; empty for the root.
  std::vector<VarId> separator(std::size_t v) const {
    std::vector<VarId> sep;
    if (v == root) return sep;
    const auto& up = chi[parent[v]];
    for (auto x : chi[v])
      if (std::find(up.begin(), up.end(), x) != up.end()) sep.push_back(x);
    return sep;
  }
};

namespace detail {

inline std::vector<std::unordered_set<VarId>> primal_graph(const Pgm& pgm) {
  std::vector<std::unordered_set<VarId>> adj(pgm.num_variables());
  for (const auto& f : pgm.factors)
    for (const auto& a : f.scope())
      for (const auto& b : f.scope())
        if (a.id != b.id) adj[a.id].insert(b.id);
  return adj;
}

inline std::size_t fill_in(const std::vector<std::unordered_set<VarId>>& adj, VarId v) {
  std::vector<VarId> nb(adj[v].begin(), adj[v].end());
  std::size_t missing = 0;
  for (std::size_t i = 0; i < nb.size(); ++i)
    for (std::size_t j = i + 1; j < nb.size(); ++j)
      if (!adj[nb[i]].count(nb[j])) ++missing;
  return missing;
}

inline bool sorted_subset(const std::vector<VarId>& a, const std::vector<VarId>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline std::size_t sorted_overlap(const std::vector<VarId>& a, const std::vector<VarId>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace detail

/// Greedy MinFill elimination order on the primal graph: repeatedly eliminate
/// the variable whose elimination adds the fewest fill edges, lowest id first.
inline std::vector<VarId> min_fill_order(const Pgm& pgm, const Deadline* deadline = nullptr) {
  const std::size_t n = pgm.num_variables();
  auto adj = detail::primal_graph(pgm);
  std::vector<std::size_t> fill(n);
  for (VarId v = 0; v < n; ++v) fill[v] = detail::fill_in(adj, v);
  std::vector<char> done(n, 0);
  std::vector<VarId> order;
  order.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    if (deadline && (step & 0x3F) == 0) deadline->check("decomposition");
    VarId best = 0;
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    for (VarId v = 0; v < n; ++v)
      if (!done[v] && fill[v] < best_fill) {
        best = v;
        best_fill = fill[v];
      }
    order.push_back(best);
    done[best] = 1;
    std::vector<VarId> nb(adj[best].begin(), adj[best].end());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      adj[nb[i]].erase(best);
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        adj[nb[i]].insert(nb[j]);
        adj[nb[j]].insert(nb[i]);
      }
    }
    adj[best].clear();
    // Only the eliminated vertex's neighbourhood (and theirs) can change score.
    std::unordered_set<VarId> touched(nb.begin(), nb.end());
    for (auto u : nb)
      for (auto w : adj[u]) touched.insert(w);
    for (auto u : touched) fill[u] = detail::fill_in(adj, u);
  }
  return order;
}

/// Junction tree from an elimination order. Bags are the maximal elimination
/// cliques (numbered by elimination step), joined by a maximum-weight spanning
/// tree on separator sizes grown from the bag of the last-eliminated variable,
/// which becomes the root. Each factor labels (and is assigned to) the
/// smallest-id bag containing its scope.
inline Ghd build_junction_tree(const Pgm& pgm, std::span<const VarId> order) {
  const std::size_t n = pgm.num_variables();
  if (order.size() != n)
    throw Error(Errc::InvalidArgument, "decomposition", "order must permute the variables");
  Ghd g;
  g.elimination_position.assign(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || g.elimination_position[order[i]] != n)
      throw Error(Errc::InvalidArgument, "decomposition", "order must permute the variables");
    g.elimination_position[order[i]] = i;
  }
  if (n == 0) return g;

  auto adj = detail::primal_graph(pgm);
  std::vector<std::vector<VarId>> cliques;
  for (auto v : order) {
    std::vector<VarId> c(adj[v].begin(), adj[v].end());
    c.push_back(v);
    std::sort(c.begin(), c.end());
    cliques.push_back(std::move(c));
    std::vector<VarId> nb(adj[v].begin(), adj[v].end());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      adj[nb[i]].erase(v);
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        adj[nb[i]].insert(nb[j]);
        adj[nb[j]].insert(nb[i]);
      }
    }
    adj[v].clear();
  }

  std::vector<std::vector<VarId>> bags;
  for (std::size_t i = 0; i < cliques.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < cliques.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool sub = detail::sorted_subset(cliques[i], cliques[j]);
      // Equal cliques: keep only the earliest.
      dominated = sub && (cliques[i].size() < cliques[j].size() || j < i);
    }
    if (!dominated) bags.push_back(cliques[i]);
  }

  const std::size_t k = bags.size();
  const VarId last = order.back();
  std::size_t root = 0;
  while (!std::binary_search(bags[root].begin(), bags[root].end(), last)) ++root;

  // Prim's algorithm for the maximum-weight spanning tree.
  g.parent.assign(k, root);
  std::vector<char> in_tree(k, 0);
  std::vector<long> best_w(k, -1);
  std::vector<std::size_t> best_p(k, root);
  in_tree[root] = 1;
  for (std::size_t j = 0; j < k; ++j)
    if (!in_tree[j]) best_w[j] = static_cast<long>(detail::sorted_overlap(bags[root], bags[j]));
  for (std::size_t added = 1; added < k; ++added) {
    std::size_t pick = k;
    for (std::size_t j = 0; j < k; ++j)
      if (!in_tree[j] && (pick == k || best_w[j] > best_w[pick])) pick = j;
    in_tree[pick] = 1;
    g.parent[pick] = best_p[pick];
    for (std::size_t j = 0; j < k; ++j) {
      if (in_tree[j]) continue;
      const auto w = static_cast<long>(detail::sorted_overlap(bags[pick], bags[j]));
      if (w > best_w[j] || (w == best_w[j] && pick < best_p[j])) {
        best_w[j] = w;
        best_p[j] = pick;
      }
    }
  }
  g.root = root;
  g.parent[root] = root;

  for (auto& b : bags)
    std::sort(b.begin(), b.end(), [&](VarId a, VarId c) {
      return g.elimination_position[a] < g.elimination_position[c];
    });
  g.chi = std::move(bags);

  g.lambda.assign(k, {});
  for (std::size_t f = 0; f < pgm.factors.size(); ++f) {
    const auto ids = pgm.factors[f].scope().ids();
    std::size_t home = k;
    for (std::size_t v = 0; v < k && home == k; ++v) {
      const auto& bag = g.chi[v];
      if (std::all_of(ids.begin(), ids.end(), [&](VarId x) {
            return std::find(bag.begin(), bag.end(), x) != bag.end();
          }))
        home = v;
    }
    if (home == k)
      throw Error(Errc::InvalidArgument, "decomposition", "factor not covered by any bag");
    g.lambda[home].push_back(f);
  }
  g.alpha = g.lambda;
  return g;
}

/// Checks the decomposition properties: tree shape, edge coverage with labels,
/// running intersection, and that every factor is assigned to exactly one bag.
/// Returns human-readable violations (empty when valid).
inline std::vector<std::string> validate_ghd(const Ghd& g, const Pgm& pgm) {
  std::vector<std::string> issues;
  const std::size_t k = g.size();
  if (k == 0) {
    if (pgm.num_variables() > 0) issues.push_back("no bags for a nonempty model");
    return issues;
  }
  if (g.parent.size() != k || g.root >= k || g.parent[g.root] != g.root)
    issues.push_back("malformed root/parent map");
  if (g.top_down().size() != k) issues.push_back("parent map is not a single tree");
  if (!issues.empty()) return issues;

  auto contains = [&](std::size_t v, VarId x) {
    return std::find(g.chi[v].begin(), g.chi[v].end(), x) != g.chi[v].end();
  };
  for (std::size_t f = 0; f < pgm.factors.size(); ++f) {
    bool ok = false;
    for (std::size_t v = 0; v < k && !ok; ++v) {
      const bool labelled =
          std::find(g.lambda[v].begin(), g.lambda[v].end(), f) != g.lambda[v].end();
      const auto& sc = pgm.factors[f].scope();
      ok = labelled && std::all_of(sc.begin(), sc.end(),
                                   [&](const Variable& x) { return contains(v, x.id); });
    }
    if (!ok) issues.push_back("factor " + std::to_string(f) + " not covered by a labelled bag");
  }
  for (VarId x = 0; x < pgm.num_variables(); ++x) {
    std::size_t holders = 0, linked = 0;
    for (std::size_t v = 0; v < k; ++v) {
      if (!contains(v, x)) continue;
      ++holders;
      if (v != g.root && contains(g.parent[v], x)) ++linked;
    }
    // The holders form a connected subtree iff exactly one of them has its
    // parent outside the set.
    if (holders == 0) issues.push_back("variable " + std::to_string(x) + " in no bag");
    else if (holders - linked != 1)
      issues.push_back("running intersection fails for variable " + std::to_string(x));
  }
  std::vector<std::size_t> assigned(pgm.factors.size(), 0);
  for (const auto& a : g.alpha)
    for (auto f : a) {
      if (f >= assigned.size()) issues.push_back("alpha names unknown factor");
      else ++assigned[f];
    }
  for (std::size_t f = 0; f < assigned.size(); ++f)
    if (assigned[f] != 1)
      issues.push_back("factor " + std::to_string(f) + " assigned " +
                       std::to_string(assigned[f]) + " times");
  return issues;
}

struct CoverEdge {
  std::vector<VarId> vars;
  double weight = 1.0;  // log2 of the factor size, or 1 for width computations
};

struct FractionalCover {
  std::vector<double> weights;  // one per input edge; 0 for edges missing the bag
  double objective = 0.0;
};

/// Optimal fractional edge cover of `bag` (min Σ w_S x_S s.t. every bag variable
/// is covered with total weight >= 1). Solved through its packing dual with the
/// dense simplex; the cover is read off the dual multipliers.
inline FractionalCover fractional_cover(std::span<const VarId> bag, std::span<const CoverEdge> edges) {
  std::vector<std::size_t> used;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].weight < 0.0)
      throw Error(Errc::InvalidArgument, "decomposition", "negative edge weight");
    const auto& ev = edges[e].vars;
    if (std::any_of(bag.begin(), bag.end(),
                    [&](VarId x) { return std::find(ev.begin(), ev.end(), x) != ev.end(); }))
      used.push_back(e);
  }
  for (auto x : bag) {
    const bool covered = std::any_of(used.begin(), used.end(), [&](std::size_t e) {
      return std::find(edges[e].vars.begin(), edges[e].vars.end(), x) != edges[e].vars.end();
    });
    if (!covered)
      throw Error(Errc::UncoverableVariable, "decomposition",
                  "variable " + std::to_string(x) + " is in no edge");
  }

  // Dual: max Σ y_x  s.t.  Σ_{x∈S∩bag} y_x <= w_S for every used edge S.
  std::vector<std::vector<double>> a(used.size(), std::vector<double>(bag.size(), 0.0));
  std::vector<double> b(used.size()), c(bag.size(), 1.0);
  for (std::size_t r = 0; r < used.size(); ++r) {
    const auto& e = edges[used[r]];
    b[r] = e.weight;
    for (std::size_t j = 0; j < bag.size(); ++j)
      if (std::find(e.vars.begin(), e.vars.end(), bag[j]) != e.vars.end()) a[r][j] = 1.0;
  }
  const auto lp = solve_packing_lp(a, b, c);
  if (!lp.bounded) throw Error(Errc::UncoverableVariable, "decomposition", "cover LP unbounded");

  FractionalCover out;
  out.weights.assign(edges.size(), 0.0);
  for (std::size_t r = 0; r < used.size(); ++r) out.weights[used[r]] = lp.dual[r];
  out.objective = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) out.objective += out.weights[e] * edges[e].weight;
  return out;
}

/// Hyperedges of the model for cover computations: one per factor, plus a
/// singleton edge for each variable no factor mentions.
inline std::vector<CoverEdge> model_edges(const Pgm& pgm) {
  std::vector<CoverEdge> edges;
  std::vector<char> seen(pgm.num_variables(), 0);
  for (const auto& f : pgm.factors) {
    CoverEdge e;
    e.vars = f.scope().ids();
    for (auto x : e.vars) seen[x] = 1;
    edges.push_back(std::move(e));
  }
  for (VarId x = 0; x < pgm.num_variables(); ++x)
    if (!seen[x]) edges.push_back({{x}, 1.0});
  return edges;
}

struct Widths {
  std::size_t tw = 0;               // max bag size
  double fhtw = 0.0;                // max fractional edge cover number over bags
  std::vector<double> bag_fractional;
};

inline Widths compute_widths(const Ghd& g, const Pgm& pgm) {
  Widths w;
  auto edges = model_edges(pgm);
  for (auto& e : edges) e.weight = 1.0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    w.tw = std::max(w.tw, g.chi[v].size());
    const double gamma = fractional_cover(g.chi[v], edges).objective;
    w.bag_fractional.push_back(gamma);
    w.fhtw = std::max(w.fhtw, gamma);
  }
  return w;
}

}  // namespace joininfer
