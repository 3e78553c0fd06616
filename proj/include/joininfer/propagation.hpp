#pragma once

// Two-pass message passing over a decomposition. The upward pass computes each
// bag product with the selected kernel and sends its separator marginal to the
// parent; the downward pass divides the parent's separator marginal by the up
// message and multiplies the quotient into the child bag.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "joininfer/decomposition.hpp"
#include "joininfer/join.hpp"

namespace joininfer {

/// Per-bag kernel choice.
enum class Strategy : int {
  Multiway = 0,    // multiway product on assigned factors and messages
  Multiway01 = 1,  // multiway product plus 01-projections of other intersecting factors
  Pairwise = 2,    // left fold of binary products
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Multiway: return "multiway";
    case Strategy::Multiway01: return "multiway01";
    case Strategy::Pairwise: return "pairwise";
  }
  return "?";
}

/// Strategy per bag, indexed by bag id.
using StrategyMap = std::vector<Strategy>;

struct PropagationOptions {
  /// 01-projections denser than this (support / domain) are not used.
  double projection_density_threshold = 0.9;
  bool use_projection_cache = true;
  /// Rescale every message to unit mass, tracking the scale in log space.
  bool normalize_messages = false;
  unsigned threads = 1;
  const Deadline* deadline = nullptr;
};

/// Memoized 01-projections keyed by (factor id, projected variable set).
class ProjectionCache {
 public:
  std::shared_ptr<const FactorTable> get(std::size_t factor_id, const FactorTable& f,
                                         std::vector<VarId> onto) {
    std::sort(onto.begin(), onto.end());
    Key key{factor_id, std::move(onto)};
    {
      std::lock_guard lock(mu_);
      if (auto it = map_.find(key); it != map_.end()) {
        ++hits_;
        return it->second;
      }
    }
    auto proj = std::make_shared<const FactorTable>(zero_one_projection(f, key.second));
    std::lock_guard lock(mu_);
    ++misses_;
    return map_.emplace(std::move(key), std::move(proj)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }
  std::uint64_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::uint64_t misses() const {
    std::lock_guard lock(mu_);
    return misses_;
  }

 private:
  using Key = std::pair<std::size_t, std::vector<VarId>>;
  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<const FactorTable>> map_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

/// Message from a bag to its parent over their separator (child bag order).
/// `hashed` maps forward separator indices to probabilities; `dual` also
/// carries the reverse indices in row order.
struct UpMessage {
  FactorTable table;
  IndexedList dual;
  HashedFactor hashed{{}, Direction::Forward};
  double log_scale = 0.0;
};

struct BagStats {
  Strategy strategy = Strategy::Multiway;
  OpCounters counters;
  std::size_t input_factors = 0;
  std::size_t projections = 0;
  std::size_t product_rows = 0;
  double seconds = 0.0;
};

/// Per-bag state of one inference run. Each entry is written only by the
/// worker processing that bag.
struct MessageStore {
  std::vector<std::optional<UpMessage>> up;   // indexed by child bag
  std::vector<FactorTable> bag_products;      // φ′ per bag (calibrated after the down pass)
  std::vector<BagStats> stats;
  /// log of the mass removed by message normalization on the upward pass.
  double log_scale = 0.0;
};

namespace detail {

/// Runs `fn(item)` for every item, spreading work over up to `threads` workers.
/// The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for_each(const std::vector<std::size_t>& items, unsigned threads, Fn&& fn) {
  if (threads <= 1 || items.size() <= 1) {
    for (auto v : items) fn(v);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        fn(items[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(items.size());
      }
    }
  };
  const auto count = std::min<std::size_t>(threads, items.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Bags grouped by depth, deepest group first.
inline std::vector<std::vector<std::size_t>> levels_bottom_up(const Ghd& g) {
  const auto depth = g.depths();
  std::size_t max_depth = 0;
  for (auto d : depth) max_depth = std::max(max_depth, d);
  std::vector<std::vector<std::size_t>> levels(g.size() ? max_depth + 1 : 0);
  for (auto v : g.top_down()) levels[max_depth - depth[v]].push_back(v);
  for (auto& l : levels) std::sort(l.begin(), l.end());
  return levels;
}

inline std::vector<Variable> bag_variables(const Ghd& g, const Pgm& pgm, std::size_t v) {
  std::vector<Variable> out;
  out.reserve(g.chi[v].size());
  for (auto x : g.chi[v]) out.push_back(pgm.var(x));
  return out;
}

/// 01-projections onto χ(v) of every factor not labelling v that intersects it,
/// in factor order, skipping projections denser than `threshold`.
inline std::vector<std::shared_ptr<const FactorTable>> bag_projections(
    const Ghd& g, const Pgm& pgm, std::size_t v, double threshold, ProjectionCache* cache) {
  std::vector<std::shared_ptr<const FactorTable>> out;
  const auto& bag = g.chi[v];
  const auto& lam = g.lambda[v];
  for (std::size_t f = 0; f < pgm.factors.size(); ++f) {
    if (std::find(lam.begin(), lam.end(), f) != lam.end()) continue;
    std::vector<VarId> common;
    for (const auto& var : pgm.factors[f].scope())
      if (std::find(bag.begin(), bag.end(), var.id) != bag.end()) common.push_back(var.id);
    if (common.empty()) continue;
    auto proj = cache ? cache->get(f, pgm.factors[f], std::move(common))
                      : std::make_shared<const FactorTable>(
                            zero_one_projection(pgm.factors[f], common));
    if (factor_sparsity(*proj) > threshold) continue;
    out.push_back(std::move(proj));
  }
  return out;
}

/// All-ones factors for bag variables that no listed factor mentions.
inline std::vector<FactorTable> unit_factors(const std::vector<Variable>& bag_vars,
                                             std::span<const FactorTable* const> factors) {
  std::vector<FactorTable> out;
  for (const auto& v : bag_vars) {
    const bool covered = std::any_of(factors.begin(), factors.end(),
                                     [&](const FactorTable* f) { return f->scope().contains(v.id); });
    if (!covered) out.push_back(FactorTable::constant(FactorScope({v}), 1.0));
  }
  return out;
}

inline BagProduct run_kernel(Strategy s, const std::vector<Variable>& bag_vars,
                             std::span<const FactorTable* const> factors,
                             const std::vector<VarId>& free_vars, const Deadline* deadline) {
  if (s == Strategy::Pairwise) return pairwise_prod(bag_vars, factors, free_vars, deadline);
  return mult_fac_prod(make_bag_query(bag_vars, factors, free_vars), deadline);
}

}  // namespace detail

/// Upward pass, leaves to root. Each bag multiplies its assigned factors, its
/// children's messages, (strategy 1) the 01-projections of intersecting
/// factors, and unit factors for otherwise uncovered variables, in that order.
inline MessageStore join_infer_up(const Ghd& g, const Pgm& pgm, const StrategyMap& r,
                                  const PropagationOptions& opt = {},
                                  ProjectionCache* cache = nullptr) {
  if (r.size() != g.size())
    throw Error(Errc::InvalidArgument, "propagation", "strategy map does not cover the bags");
  MessageStore store;
  store.up.resize(g.size());
  store.bag_products.resize(g.size());
  store.stats.resize(g.size());
  const auto kids = g.children();
  ProjectionCache local;
  if (!cache && opt.use_projection_cache) cache = &local;
  if (!opt.use_projection_cache) cache = nullptr;

  auto process = [&](std::size_t v) {
    if (opt.deadline) opt.deadline->check("propagation");
    const auto start = std::chrono::steady_clock::now();
    const auto bag_vars = detail::bag_variables(g, pgm, v);
    std::vector<const FactorTable*> inputs;
    for (auto f : g.lambda[v]) inputs.push_back(&pgm.factors[f]);
    for (auto c : kids[v]) inputs.push_back(&store.up[c]->table);
    std::vector<std::shared_ptr<const FactorTable>> projections;
    if (r[v] == Strategy::Multiway01)
      projections = detail::bag_projections(g, pgm, v, opt.projection_density_threshold, cache);
    for (const auto& p : projections) inputs.push_back(p.get());
    const auto units = detail::unit_factors(bag_vars, inputs);
    for (const auto& u : units) inputs.push_back(&u);

    const auto sep = g.is_root(v) ? g.chi[v] : g.separator(v);
    auto res = detail::run_kernel(r[v], bag_vars, inputs, sep, opt.deadline);

    auto& st = store.stats[v];
    st.strategy = r[v];
    st.counters = res.counters;
    st.input_factors = inputs.size();
    st.projections = projections.size();
    st.product_rows = res.product.size();
    store.bag_products[v] = std::move(res.product);
    if (!g.is_root(v)) {
      UpMessage m;
      m.table = std::move(res.marginal);
      if (opt.normalize_messages) {
        const double mass = m.table.total();
        if (mass > 0.0) {
          m.table.scale(1.0 / mass);
          m.log_scale = std::log(mass);
        }
      }
      m.dual = IndexedList::from_factor(m.table, IndexedList::Variant::Dual);
      m.hashed = HashedFactor::from_entries(m.dual.radix(), Direction::Forward,
                                            m.dual.entries(Direction::Forward));
      store.up[v] = std::move(m);
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  for (const auto& level : detail::levels_bottom_up(g))
    detail::parallel_for_each(level, opt.threads, process);
  for (std::size_t v = 0; v < g.size(); ++v)
    if (store.up[v]) store.log_scale += store.up[v]->log_scale;
  return store;
}

/// Downward pass, root to leaves; updates `store.bag_products` in place and
/// returns them. Every bag is updated exactly once.
inline const std::vector<FactorTable>& join_infer_down(const Ghd& g, MessageStore& store,
                                                       const PropagationOptions& opt = {}) {
  const auto kids = g.children();
  auto levels = detail::levels_bottom_up(g);
  std::reverse(levels.begin(), levels.end());
  std::vector<char> updated(g.size(), 0);
  if (g.size()) updated[g.root] = 1;

  auto process = [&](std::size_t v) {
    if (opt.deadline) opt.deadline->check("propagation");
    for (auto w : kids[v]) {
      if (updated[w])
        throw Error(Errc::InvalidArgument, "propagation", "bag updated twice");
      const auto sep = g.separator(w);
      const auto& up = *store.up[w];
      FactorTable phi2 = marginalize(store.bag_products[v], std::span<const VarId>(sep));
      if (opt.normalize_messages) {
        const double mass = phi2.total();
        if (mass > 0.0) phi2.scale(1.0 / mass);
      }
      auto down = IndexedList::from_factor(phi2, IndexedList::Variant::Dual)
                      .entries(Direction::Forward);
      hash_product(up.hashed, down, ProductOp::Divide);
      const auto down_hash =
          HashedFactor::from_entries(up.hashed.radix(), Direction::Forward, down);
      auto& phi_w = store.bag_products[w];
      const auto key_pos = detail::positions_in(phi_w.scope(), sep);
      hash_product(down_hash, phi_w, key_pos, ProductOp::Multiply);
      updated[w] = 1;
    }
  };
  // Children of bags in one level form the next level, so writes never overlap.
  for (const auto& level : levels) detail::parallel_for_each(level, opt.threads, process);
  return store.bag_products;
}

/// Normalized variable and factor marginals read from calibrated bags: each
/// variable from the smallest-id bag containing it, each factor from its
/// labelled bag. log Z combines the root mass, the message scales and the
/// model constant.
inline Marginals extract_marginals(const std::vector<FactorTable>& bag_products, const Ghd& g,
                                   const Pgm& pgm, double log_scale = 0.0) {
  Marginals out;
  double z = 1.0;
  if (g.size()) z = bag_products[g.root].total();
  if (!(z > 0.0) || !(pgm.constant > 0.0))
    throw Error(Errc::InconsistentModel, "propagation", "partition function is zero");
  out.log_partition = std::log(z) + log_scale + std::log(pgm.constant);

  for (VarId x = 0; x < pgm.num_variables(); ++x) {
    std::size_t home = g.size();
    for (std::size_t v = 0; v < g.size() && home == g.size(); ++v)
      if (std::find(g.chi[v].begin(), g.chi[v].end(), x) != g.chi[v].end()) home = v;
    if (home == g.size())
      throw Error(Errc::InvalidArgument, "propagation", "variable outside every bag");
    const VarId keep[] = {x};
    const auto m = marginalize(bag_products[home], std::span<const VarId>(keep));
    const double mass = m.total();
    if (!(mass > 0.0))
      throw Error(Errc::InconsistentModel, "propagation", "bag with zero mass");
    std::vector<double> dist(pgm.cardinality(x), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) dist[m.row(i)[0]] = m.prob(i) / mass;
    out.variables.push_back(std::move(dist));
  }

  std::vector<std::size_t> home_of(pgm.factors.size(), g.size());
  for (std::size_t v = 0; v < g.size(); ++v)
    for (auto f : g.lambda[v]) home_of[f] = std::min(home_of[f], v);
  for (std::size_t f = 0; f < pgm.factors.size(); ++f) {
    const auto& scope = pgm.factors[f].scope();
    if (scope.size() == 0) {
      out.factors.push_back(pgm.factors[f].empty() ? FactorTable::scalar(0.0)
                                                   : FactorTable::scalar(1.0));
      continue;
    }
    if (home_of[f] == g.size())
      throw Error(Errc::InvalidArgument, "propagation", "factor without a labelled bag");
    auto m = marginalize(bag_products[home_of[f]], scope);
    const double mass = m.total();
    if (mass > 0.0) m.scale(1.0 / mass);
    out.factors.push_back(std::move(m));
  }
  return out;
}

}  // namespace joininfer
