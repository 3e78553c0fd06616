#pragma once

// Exact marginals by enumerating every joint assignment. Reference
// implementation for testing; guarded to small state spaces.

#include <cmath>
#include <vector>

#include "joininfer/uai.hpp"

namespace joininfer {

inline constexpr double kBruteForceLimit = 1e7;

/// Variable and factor marginals of `pgm` conditioned on `ev`, in the ids of
/// `pgm`. Observed variables get a point mass. Enumeration runs in forward
/// mixed-radix order (last free variable fastest) with per-factor strides into
/// dense copies of the tables.
inline Marginals brute_force_marginals(const Pgm& pgm, const Evidence& ev = {}) {
  const std::size_t n = pgm.num_variables();
  std::vector<long long> observed(n, -1);
  for (const auto& [var, val] : ev.assignments) {
    if (var >= n || val >= pgm.cardinality(var))
      throw Error(Errc::ValueOutOfRange, "oracle", "evidence outside the model");
    observed[var] = val;
  }
  std::vector<VarId> free;
  double states = 1.0;
  for (VarId x = 0; x < n; ++x)
    if (observed[x] < 0) {
      free.push_back(x);
      states *= pgm.cardinality(x);
    }
  if (states > kBruteForceLimit)
    throw Error(Errc::TooLarge, "oracle", "state space of " + std::to_string(states));

  const std::size_t m = pgm.factors.size();
  std::vector<std::vector<double>> dense(m);
  std::vector<std::vector<std::size_t>> stride(m, std::vector<std::size_t>(n, 0));
  std::vector<std::size_t> offset(m, 0);
  for (std::size_t f = 0; f < m; ++f) {
    const auto& t = pgm.factors[f];
    if (t.scope().domain_size() > kBruteForceLimit)
      throw Error(Errc::TooLarge, "oracle", "factor domain too large");
    std::vector<double> d(static_cast<std::size_t>(t.scope().domain_size()), 0.0);
    std::size_t s = 1;
    for (std::size_t j = t.arity(); j-- > 0;) {
      const auto x = t.scope()[j].id;
      if (observed[x] >= 0)
        offset[f] += static_cast<std::size_t>(observed[x]) * s;
      else
        stride[f][x] = s;
      s *= t.scope()[j].cardinality;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::size_t idx = 0, w = 1;
      const auto r = t.row(i);
      for (std::size_t j = t.arity(); j-- > 0;) {
        idx += r[j] * w;
        w *= t.scope()[j].cardinality;
      }
      d[idx] = t.prob(i);
    }
    dense[f] = std::move(d);
  }

  std::vector<std::vector<double>> var_acc(n);
  for (VarId x = 0; x < n; ++x) var_acc[x].assign(pgm.cardinality(x), 0.0);
  std::vector<std::vector<double>> fac_acc(m);
  for (std::size_t f = 0; f < m; ++f) fac_acc[f].assign(dense[f].size(), 0.0);

  std::vector<Value> assign(n, 0);
  for (VarId x = 0; x < n; ++x)
    if (observed[x] >= 0) assign[x] = static_cast<Value>(observed[x]);
  std::vector<std::size_t> idx = offset;
  double z = 0.0;
  const auto total = static_cast<std::size_t>(states);
  for (std::size_t step = 0; step < total; ++step) {
    double p = 1.0;
    for (std::size_t f = 0; f < m && p > 0.0; ++f) p *= dense[f][idx[f]];
    if (p > 0.0) {
      z += p;
      for (VarId x = 0; x < n; ++x) var_acc[x][assign[x]] += p;
      for (std::size_t f = 0; f < m; ++f) fac_acc[f][idx[f]] += p;
    }
    for (std::size_t i = free.size(); i-- > 0;) {
      const auto x = free[i];
      if (++assign[x] < pgm.cardinality(x)) {
        for (std::size_t f = 0; f < m; ++f) idx[f] += stride[f][x];
        break;
      }
      for (std::size_t f = 0; f < m; ++f) idx[f] -= (pgm.cardinality(x) - 1) * stride[f][x];
      assign[x] = 0;
    }
  }
  if (!(z > 0.0) || !(pgm.constant > 0.0))
    throw Error(Errc::InconsistentModel, "oracle", "partition function is zero");

  Marginals out;
  out.log_partition = std::log(z) + std::log(pgm.constant);
  for (VarId x = 0; x < n; ++x) {
    for (double& v : var_acc[x]) v /= z;
    out.variables.push_back(std::move(var_acc[x]));
  }
  for (std::size_t f = 0; f < m; ++f) {
    const auto& t = pgm.factors[f];
    const auto cards = t.scope().cardinalities();
    std::vector<Value> values, tuple(cards.size(), 0);
    std::vector<double> probs;
    for (std::size_t i = 0; i < fac_acc[f].size(); ++i) {
      if (fac_acc[f][i] > 0.0) {
        values.insert(values.end(), tuple.begin(), tuple.end());
        probs.push_back(fac_acc[f][i] / z);
      }
      for (std::size_t j = cards.size(); j-- > 0;) {
        if (++tuple[j] < cards[j]) break;
        tuple[j] = 0;
      }
    }
    out.factors.push_back(FactorTable::from_sorted(t.scope(), std::move(values), std::move(probs)));
  }
  return out;
}

}  // namespace joininfer
