#pragma once

// Conditioning on evidence, support-intersection singleton consistency and
// seeded sparsity induction for benchmark models.

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "joininfer/uai.hpp"

namespace joininfer {

/// Restricts every factor to the observed values and removes the observed
/// variables. Surviving variables are renumbered densely in id order and
/// `source_ids` keeps their original ids. Factors reduced to a scalar are
/// folded into `constant`.
inline Pgm apply_evidence(const Pgm& pgm, const Evidence& ev) {
  const std::size_t n = pgm.num_variables();
  std::vector<long long> observed(n, -1);
  for (const auto& [var, val] : ev.assignments) {
    if (var >= n)
      throw Error(Errc::ValueOutOfRange, "preprocess",
                  "evidence on unknown variable " + std::to_string(var));
    if (val >= pgm.cardinality(var))
      throw Error(Errc::ValueOutOfRange, "preprocess",
                  "evidence value " + std::to_string(val) + " for variable " + std::to_string(var));
    observed[var] = val;
  }

  Pgm out;
  out.constant = pgm.constant;
  std::vector<VarId> renum(n, 0);
  for (VarId x = 0; x < n; ++x) {
    if (observed[x] >= 0) continue;
    renum[x] = static_cast<VarId>(out.variables.size());
    out.variables.push_back({renum[x], pgm.cardinality(x)});
    out.source_ids.push_back(pgm.source_ids[x]);
  }

  for (std::size_t fi = 0; fi < pgm.factors.size(); ++fi) {
    const auto& f = pgm.factors[fi];
    std::vector<std::size_t> keep;
    std::vector<std::pair<std::size_t, Value>> fixed;
    std::vector<Variable> vars;
    for (std::size_t j = 0; j < f.arity(); ++j) {
      const auto x = f.scope()[j].id;
      if (observed[x] >= 0) {
        fixed.emplace_back(j, static_cast<Value>(observed[x]));
      } else {
        keep.push_back(j);
        vars.push_back({renum[x], f.scope()[j].cardinality});
      }
    }
    // Fixed coordinates are constant across surviving rows, so the kept
    // coordinates stay unique and sorted.
    std::vector<Value> values;
    std::vector<double> probs;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto r = f.row(i);
      bool match = true;
      for (const auto& [j, v] : fixed) match = match && r[j] == v;
      if (!match) continue;
      for (auto j : keep) values.push_back(r[j]);
      probs.push_back(f.prob(i));
    }
    if (probs.empty() && !fixed.empty())
      throw Error(Errc::InconsistentEvidence, "preprocess",
                  "factor " + std::to_string(fi) + " has no tuple matching the evidence");
    if (vars.empty() && !fixed.empty()) {
      out.constant *= probs.front();
      continue;
    }
    out.factors.push_back(
        FactorTable::from_sorted(FactorScope(std::move(vars)), std::move(values), std::move(probs)));
  }
  return out;
}

/// Repeatedly fixes every variable whose supported values (the intersection of
/// its projections over all factors that mention it) form a singleton. Returns
/// the reduced model and the inferred assignments in the input model's ids.
inline std::pair<Pgm, Evidence> singleton_consistency(const Pgm& pgm) {
  Pgm cur = pgm;
  // Id in the input model of each variable of `cur`.
  std::vector<VarId> to_input(pgm.num_variables());
  for (VarId x = 0; x < to_input.size(); ++x) to_input[x] = x;
  Evidence inferred;

  for (;;) {
    const std::size_t n = cur.num_variables();
    std::vector<std::vector<char>> support(n);
    for (VarId x = 0; x < n; ++x) support[x].assign(cur.cardinality(x), 1);
    for (const auto& f : cur.factors) {
      for (std::size_t j = 0; j < f.arity(); ++j) {
        const auto x = f.scope()[j].id;
        std::vector<char> seen(cur.cardinality(x), 0);
        for (std::size_t i = 0; i < f.size(); ++i) seen[f.row(i)[j]] = 1;
        for (std::size_t v = 0; v < seen.size(); ++v) support[x][v] &= seen[v];
      }
    }
    Evidence step;
    for (VarId x = 0; x < n; ++x) {
      std::size_t count = 0;
      Value only = 0;
      for (Value v = 0; v < support[x].size(); ++v)
        if (support[x][v]) {
          ++count;
          only = v;
        }
      if (count == 0)
        throw Error(Errc::Unsatisfiable, "preprocess",
                    "variable " + std::to_string(to_input[x]) + " has no supported value");
      if (count == 1) step.assignments.emplace(x, only);
    }
    if (step.empty()) break;
    try {
      cur = apply_evidence(cur, step);
    } catch (const Error& e) {
      if (e.code() != Errc::InconsistentEvidence) throw;
      throw Error(Errc::Unsatisfiable, "preprocess", "forced values conflict");
    }
    std::vector<VarId> next;
    for (VarId x = 0; x < n; ++x) {
      auto it = step.assignments.find(x);
      if (it == step.assignments.end())
        next.push_back(to_input[x]);
      else
        inferred.assignments.emplace(to_input[x], it->second);
    }
    to_input = std::move(next);
  }
  return {std::move(cur), std::move(inferred)};
}

/// Keeps round(target * domain) tuples of each factor: the diagonal tuples
/// (i, ..., i) are always kept (with probability `epsilon` when absent from
/// the input), the rest is a seeded uniform sample of the existing support.
inline Pgm induce_sparsity(const Pgm& pgm, double target, std::uint64_t seed,
                           double epsilon = 1e-6) {
  if (!(target > 0.0 && target <= 1.0))
    throw Error(Errc::InvalidArgument, "preprocess", "sparsity target must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  Pgm out = pgm;
  for (auto& f : out.factors) {
    if (f.arity() == 0) continue;
    const auto quota = static_cast<std::size_t>(std::llround(target * f.scope().domain_size()));
    std::uint32_t min_card = std::numeric_limits<std::uint32_t>::max();
    for (const auto& v : f.scope()) min_card = std::min(min_card, v.cardinality);

    std::vector<FactorEntry> kept;
    for (Value i = 0; i < min_card; ++i) {
      std::vector<Value> diag(f.arity(), i);
      const double p = f.lookup(diag);
      kept.push_back({std::move(diag), p > 0.0 ? p : epsilon});
    }
    std::vector<std::size_t> pool;
    for (std::size_t r = 0; r < f.size(); ++r) {
      const auto row = f.row(r);
      if (!std::all_of(row.begin(), row.end(), [&](Value v) { return v == row[0]; }))
        pool.push_back(r);
    }
    const std::size_t extra = quota > kept.size() ? std::min(quota - kept.size(), pool.size()) : 0;
    for (std::size_t i = 0; i < extra; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      const auto row = f.row(pool[i]);
      kept.push_back({std::vector<Value>(row.begin(), row.end()), f.prob(pool[i])});
    }
    f = make_factor(f.scope(), kept);
  }
  return out;
}

}  // namespace joininfer
