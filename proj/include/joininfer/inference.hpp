#pragma once

// End-to-end driver: condition, reduce, decompose, choose kernels, propagate,
// and report marginals in the ids of the input model.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "joininfer/hyjar.hpp"
#include "joininfer/metrics.hpp"
#include "joininfer/preprocess.hpp"
#include "joininfer/propagation.hpp"

namespace joininfer {

enum class StrategyMode { Hyjar, Multiway, Multiway01, Pairwise };

inline std::optional<StrategyMode> parse_strategy_mode(std::string_view s) {
  if (s == "hyjar") return StrategyMode::Hyjar;
  if (s == "multiway") return StrategyMode::Multiway;
  if (s == "multiway01") return StrategyMode::Multiway01;
  if (s == "pairwise") return StrategyMode::Pairwise;
  return std::nullopt;
}

struct InferenceOptions {
  StrategyMode strategy = StrategyMode::Hyjar;
  std::uint64_t seed = 0;
  std::optional<double> induce_sparsity;
  std::optional<double> timeout_seconds;
  double projection_density_threshold = 0.9;
  double rho_threshold = 1e9;
  unsigned threads = 1;
  unsigned hyjar_trials = 1;
  bool normalize_messages = false;
  bool singleton_consistency = true;
  /// Fills the width and predictor fields of the stats (one LP per bag).
  bool compute_widths = false;
};

struct InferenceStats {
  std::size_t variables = 0;          // after conditioning and reduction
  std::size_t factors = 0;
  std::size_t inferred_evidence = 0;  // variables fixed by singleton consistency
  std::size_t bags = 0;
  std::size_t max_bag = 0;  // tw under the max-bag-size convention
  std::vector<std::size_t> bag_sizes;
  double rho = 0.0;
  std::vector<double> bag_agm;  // per-bag AGM bounds (with compute_widths)
  std::optional<double> fhtw;
  std::optional<double> rj;
  std::optional<double> rd;
  bool hyjar_random = false;
  StrategyMap strategies;
  std::vector<BagStats> bag_stats;
  OpCounters totals;
  std::uint64_t projection_cache_hits = 0;
  std::uint64_t projection_cache_misses = 0;
  double seconds_preprocess = 0.0;
  double seconds_decompose = 0.0;
  double seconds_select = 0.0;
  double seconds_up = 0.0;
  double seconds_down = 0.0;
  double seconds_total = 0.0;
};

struct InferenceResult {
  Marginals marginals;
  InferenceStats stats;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

/// Joint normalized distribution of `vars` (reduced ids) read from the
/// smallest-id bag containing all of them.
inline FactorTable bag_marginal(const std::vector<FactorTable>& bags, const Ghd& g,
                                const Pgm& reduced, const std::vector<VarId>& vars) {
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& chi = g.chi[v];
    if (!std::all_of(vars.begin(), vars.end(), [&](VarId x) {
          return std::find(chi.begin(), chi.end(), x) != chi.end();
        }))
      continue;
    auto m = marginalize(bags[v], reduced.scope_of(vars));
    const double mass = m.total();
    if (mass > 0.0) m.scale(1.0 / mass);
    return m;
  }
  throw Error(Errc::InvalidArgument, "propagation", "no bag covers a factor scope");
}

}  // namespace detail

/// Marginals of `pgm` given `ev`. Observed and inferred variables receive point
/// masses; factor marginals are over the original factor scopes.
inline InferenceResult run_inference(const Pgm& input, const Evidence& ev,
                                     const InferenceOptions& opt = {}) {
  std::optional<Deadline> deadline;
  if (opt.timeout_seconds) deadline.emplace(std::chrono::duration<double>(*opt.timeout_seconds));
  const Deadline* dl = deadline ? &*deadline : nullptr;
  detail::Stopwatch total, clock;
  InferenceResult res;
  auto& st = res.stats;

  Pgm model = opt.induce_sparsity ? induce_sparsity(input, *opt.induce_sparsity, opt.seed) : input;
  for (VarId x = 0; x < model.num_variables(); ++x) model.source_ids[x] = x;
  Pgm reduced = apply_evidence(model, ev);
  Evidence fixed = ev;
  if (opt.singleton_consistency) {
    auto [r, inferred] = singleton_consistency(reduced);
    st.inferred_evidence = inferred.size();
    for (const auto& [x, val] : inferred.assignments)
      fixed.assignments.emplace(reduced.source_ids[x], val);
    reduced = std::move(r);
  }
  // Scalar factors only scale the partition function.
  std::vector<FactorTable> kept;
  for (auto& f : reduced.factors) {
    if (f.arity() > 0) {
      kept.push_back(std::move(f));
    } else {
      reduced.constant *= f.empty() ? 0.0 : f.prob(0);
    }
  }
  reduced.factors = std::move(kept);
  st.variables = reduced.num_variables();
  st.factors = reduced.factors.size();
  st.seconds_preprocess = clock.lap();

  const auto order = min_fill_order(reduced, dl);
  const Ghd g = build_junction_tree(reduced, order);
  st.bags = g.size();
  for (const auto& bag : g.chi) {
    st.bag_sizes.push_back(bag.size());
    st.max_bag = std::max(st.max_bag, bag.size());
  }
  st.rho = compute_rho(g, reduced);
  if (opt.compute_widths && g.size()) {
    const auto w = compute_widths(g, reduced);
    st.fhtw = w.fhtw;
    st.rd = compute_RD(reduced, w);
    st.bag_agm = bag_agm_bounds(g, reduced);
    double agm_sum = 0.0;
    for (double a : st.bag_agm) agm_sum += a;
    st.rj = agm_sum / st.rho;
  }
  st.seconds_decompose = clock.lap();

  switch (opt.strategy) {
    case StrategyMode::Multiway: st.strategies.assign(g.size(), Strategy::Multiway); break;
    case StrategyMode::Multiway01: st.strategies.assign(g.size(), Strategy::Multiway01); break;
    case StrategyMode::Pairwise: st.strategies.assign(g.size(), Strategy::Pairwise); break;
    case StrategyMode::Hyjar: {
      HyjarOptions h;
      h.rho_threshold = opt.rho_threshold;
      h.trials = opt.hyjar_trials;
      h.projection_density_threshold = opt.projection_density_threshold;
      h.deadline = dl;
      auto rep = hyjar_select(g, reduced, st.rho, opt.seed, h);
      st.strategies = std::move(rep.strategies);
      st.hyjar_random = rep.random_branch;
      break;
    }
  }
  st.seconds_select = clock.lap();

  PropagationOptions popt;
  popt.projection_density_threshold = opt.projection_density_threshold;
  popt.normalize_messages = opt.normalize_messages;
  popt.threads = std::max(1u, opt.threads);
  popt.deadline = dl;
  ProjectionCache cache;
  MessageStore store = join_infer_up(g, reduced, st.strategies, popt, &cache);
  st.seconds_up = clock.lap();
  join_infer_down(g, store, popt);
  st.seconds_down = clock.lap();
  st.projection_cache_hits = cache.hits();
  st.projection_cache_misses = cache.misses();
  st.bag_stats = store.stats;
  for (const auto& b : store.stats) st.totals += b.counters;

  const Marginals inner = extract_marginals(store.bag_products, g, reduced, store.log_scale);

  // Map back to the input model's ids and factor scopes.
  const std::size_t n = model.num_variables();
  std::vector<long long> to_reduced(n, -1);
  for (VarId x = 0; x < reduced.num_variables(); ++x) to_reduced[reduced.source_ids[x]] = x;
  auto& out = res.marginals;
  out.log_partition = inner.log_partition;
  for (VarId x = 0; x < n; ++x) {
    if (to_reduced[x] >= 0) {
      out.variables.push_back(inner.variables[static_cast<std::size_t>(to_reduced[x])]);
    } else {
      std::vector<double> point(model.cardinality(x), 0.0);
      point[fixed.assignments.at(x)] = 1.0;
      out.variables.push_back(std::move(point));
    }
  }
  for (const auto& f : model.factors) {
    std::vector<VarId> free_reduced;
    for (const auto& v : f.scope())
      if (to_reduced[v.id] >= 0) free_reduced.push_back(static_cast<VarId>(to_reduced[v.id]));
    FactorTable joint = free_reduced.empty()
                            ? FactorTable::scalar(1.0)
                            : detail::bag_marginal(store.bag_products, g, reduced, free_reduced);
    std::vector<Value> values;
    for (std::size_t i = 0; i < joint.size(); ++i) {
      std::size_t k = 0;
      for (const auto& v : f.scope())
        values.push_back(to_reduced[v.id] >= 0 ? joint.row(i)[k++] : fixed.assignments.at(v.id));
    }
    std::vector<double> probs(joint.probs().begin(), joint.probs().end());
    out.factors.push_back(FactorTable::from_sorted(f.scope(), std::move(values), std::move(probs)));
  }
  st.seconds_total = total.lap();
  return res;
}

}  // namespace joininfer
