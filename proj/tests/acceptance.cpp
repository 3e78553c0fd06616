// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "support.hpp"

using namespace joininfer;

namespace {

/// Collects failure notes for one criterion; only the first few are printed.
struct Check {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int run_criterion(int id, const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s [%d] %s (%.1fs)\n", c.failures.empty() ? "PASS" : "FAIL", id, name.c_str(), secs);
  for (std::size_t i = 0; i < std::min<std::size_t>(c.failures.size(), 5); ++i)
    std::printf("    %s\n", c.failures[i].c_str());
  if (c.failures.size() > 5) std::printf("    ... %zu more\n", c.failures.size() - 5);
  std::fflush(stdout);
  return c.failures.empty() ? 0 : 1;
}

std::string str(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

struct Case {
  Pgm pgm;
  Evidence ev;
};

/// The shared model pool: alternating tree-shaped and loopy models, every
/// other pair carrying evidence drawn from the planted assignment.
std::vector<Case> model_pool(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Case> out;
  for (std::size_t i = 0; i < count; ++i) {
    jtest::ModelShape shape;
    shape.max_vars = 15;
    shape.max_card = 4;
    shape.min_sparsity = 0.2;
    shape.max_sparsity = 1.0;
    shape.loopy = i % 2 == 1;
    std::vector<Value> hidden;
    auto pgm = jtest::random_model(rng, shape, &hidden);
    Evidence ev;
    if (i % 4 >= 2) ev = jtest::random_evidence(rng, hidden, jtest::uniform(rng, 1, 3));
    out.push_back({std::move(pgm), std::move(ev)});
  }
  return out;
}

Ghd ghd_for(const Pgm& pgm) { return build_junction_tree(pgm, min_fill_order(pgm)); }

constexpr StrategyMode kModes[] = {StrategyMode::Multiway, StrategyMode::Multiway01,
                                   StrategyMode::Pairwise, StrategyMode::Hyjar};
constexpr const char* kModeNames[] = {"multiway", "multiway01", "pairwise", "hyjar"};

struct PoolResults {
  std::vector<Marginals> oracle;
  std::vector<std::array<Marginals, 4>> engine;  // indexed like kModes
};

PoolResults run_pool(const std::vector<Case>& pool) {
  PoolResults r;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    r.oracle.push_back(brute_force_marginals(pool[i].pgm, pool[i].ev));
    std::array<Marginals, 4> per;
    for (std::size_t m = 0; m < 4; ++m) {
      InferenceOptions opt;
      opt.strategy = kModes[m];
      opt.seed = i;
      per[m] = run_inference(pool[i].pgm, pool[i].ev, opt).marginals;
    }
    r.engine.push_back(std::move(per));
  }
  return r;
}

// e(A,B), f(A,C), g(B,C,D): dense pairwise factors and a sparse ternary one.
Pgm abcd_model(std::uint64_t seed, double sparse) {
  std::vector<std::uint32_t> cards{3, 3, 3, 2};
  std::mt19937_64 rng(seed);
  std::vector<Value> p2{0, 0}, p3{0, 0, 0};
  std::vector<FactorTable> fs;
  fs.push_back(jtest::random_factor(rng, jtest::scope_of({{0, 3}, {1, 3}}), 1.0, &p2));
  fs.push_back(jtest::random_factor(rng, jtest::scope_of({{0, 3}, {2, 3}}), 1.0, &p2));
  fs.push_back(jtest::random_factor(rng, jtest::scope_of({{1, 3}, {2, 3}, {3, 2}}), sparse, &p3));
  return Pgm::make(cards, std::move(fs));
}

StrategyMap uniform_map(const Ghd& g, Strategy s) { return StrategyMap(g.size(), s); }

std::string cli_output(const std::string& args) {
  const std::string cmd = std::string("'") + JOININFER_CLI + "' " + args + " 2>/dev/null";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return "<popen failed>";
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) out += "<exit " + std::to_string(status) + ">";
  return out;
}

/// Exact radix product check in 128 bits.
bool exceeds_signed_limit(const std::vector<std::uint32_t>& cards) {
  unsigned __int128 p = 1;
  const unsigned __int128 limit = static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max());
  for (auto c : cards) {
    p *= c;
    if (p > limit) return true;
  }
  return false;
}

}  // namespace

int main() {
  const auto pool = model_pool(200, 20240601);
  PoolResults results;
  int failed = 0;

  failed += run_criterion(1, "oracle equivalence on 200 models", [&](Check& c) {
    results = run_pool(pool);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double d = jtest::max_abs_diff(results.engine[i][3].variables, results.oracle[i].variables);
      c.expect(d <= 1e-9, "model " + std::to_string(i) + ": max |diff| " + str(d));
    }
  });

  failed += run_criterion(2, "strategy invariance", [&](Check& c) {
    c.expect(results.engine.size() == pool.size(), "pool results missing");
    for (std::size_t i = 0; i < results.engine.size(); ++i)
      for (std::size_t m = 1; m < 4; ++m) {
        const double d =
            jtest::max_abs_diff(results.engine[i][m].variables, results.engine[i][0].variables);
        c.expect(d <= 1e-9, "model " + std::to_string(i) + " " + kModeNames[m] + " vs multiway: " + str(d));
      }
  });

  failed += run_criterion(3, "triangle cover and fhtw <= tw", [&](Check& c) {
    const std::vector<VarId> bag{0, 1, 2};
    const std::vector<CoverEdge> edges{{{0, 1}, 1.0}, {{1, 2}, 1.0}, {{0, 2}, 1.0}};
    const auto cover = fractional_cover(bag, edges);
    for (double w : cover.weights) c.expect(std::abs(w - 0.5) <= 1e-6, "cover weight " + str(w));
    c.expect(std::abs(cover.objective - 1.5) <= 1e-6, "triangle cover " + str(cover.objective));

    const auto tri = jtest::sparse_triangle(64);
    const std::vector<std::uint32_t> cards(3, tri[0].scope()[0].cardinality);
    const auto w = compute_widths(ghd_for(Pgm::make(cards, tri)), Pgm::make(cards, tri));
    c.expect(std::abs(w.fhtw - 1.5) <= 1e-6, "triangle model fhtw " + str(w.fhtw));

    std::mt19937_64 rng(303);
    for (int t = 0; t < 100; ++t) {
      jtest::ModelShape shape;
      shape.max_vars = 15;
      const auto pgm = jtest::random_model(rng, shape);
      const auto ws = compute_widths(ghd_for(pgm), pgm);
      c.expect(ws.fhtw <= static_cast<double>(ws.tw) + 1e-9,
               "ghd " + std::to_string(t) + ": fhtw " + str(ws.fhtw) + " > tw " + std::to_string(ws.tw));
    }
  });

  failed += run_criterion(4, "triangle scaling at N = 64, 256, 1024", [&](Check& c) {
    const std::vector<std::size_t> sizes{64, 256, 1024};
    double c_multi = 0.0, c_pair = 0.0;
    for (auto n : sizes) {
      const auto fs = jtest::sparse_triangle(n);
      for (const auto& f : fs) c.expect(f.size() == n, "factor size " + std::to_string(f.size()));
      const std::vector<Variable> bag{fs[0].scope()[0], fs[0].scope()[1], fs[1].scope()[0]};
      const auto m = mult_fac_prod(make_bag_query(bag, std::span<const FactorTable>(fs), {}));
      const std::vector<VarId> none;
      const auto p = pairwise_prod(bag, std::span<const FactorTable>(fs), none);
      c.expect(m.product == p.product, "kernels disagree at N=" + std::to_string(n));
      const double nn = static_cast<double>(n);
      const double multi = static_cast<double>(m.counters.seek_count + m.counters.emit_count) /
                           (std::pow(nn, 1.5) * std::log2(nn));
      const double pair = static_cast<double>(p.counters.first_intermediate) / (nn * nn);
      std::printf("    N=%-5zu seeks+emits=%-9llu ratio=%.4f  first_intermediate=%-9llu ratio=%.4f\n", n,
                  static_cast<unsigned long long>(m.counters.seek_count + m.counters.emit_count), multi,
                  static_cast<unsigned long long>(p.counters.first_intermediate), pair);
      if (n == sizes.front()) {
        c_multi = multi;
        c_pair = pair;
        continue;
      }
      c.expect(multi <= 2.0 * c_multi, "multiway constant " + str(multi) + " vs fitted " + str(c_multi));
      c.expect(pair <= 2.0 * c_pair && pair >= 0.5 * c_pair,
               "pairwise constant " + str(pair) + " vs fitted " + str(c_pair));
    }
  });

  failed += run_criterion(5, "01-projection soundness", [&](Check& c) {
    for (std::size_t i = 0; i < results.engine.size(); ++i) {
      const double d = jtest::max_abs_diff(results.engine[i][1].variables, results.engine[i][0].variables);
      c.expect(d <= 1e-9, "model " + std::to_string(i) + ": projections moved marginals by " + str(d));
    }
    for (std::uint64_t seed : {5, 6, 7, 8, 9}) {
      const auto pgm = abcd_model(seed, 0.3);
      const auto g = ghd_for(pgm);
      c.expect(g.size() == 2, "A-B-C-D model has " + std::to_string(g.size()) + " bags");
      if (g.size() != 2) continue;
      const std::size_t child = g.root == 0 ? 1 : 0;
      const auto with = join_infer_up(g, pgm, uniform_map(g, Strategy::Multiway01));
      const auto without = join_infer_up(g, pgm, uniform_map(g, Strategy::Multiway));
      const auto e1 = with.stats[child].counters.emit_count, e0 = without.stats[child].counters.emit_count;
      std::printf("    seed %llu: child emits %llu with projection, %llu without\n",
                  static_cast<unsigned long long>(seed), static_cast<unsigned long long>(e1),
                  static_cast<unsigned long long>(e0));
      c.expect(e1 < e0, "no reduction for seed " + std::to_string(seed));
      const auto oracle = brute_force_marginals(pgm);
      auto store = join_infer_up(g, pgm, uniform_map(g, Strategy::Multiway01));
      join_infer_down(g, store);
      const auto m = extract_marginals(store.bag_products, g, pgm, store.log_scale);
      c.expect(jtest::max_abs_diff(m.variables, oracle.variables) <= 1e-9, "A-B-C-D marginals off");
    }
  });

  failed += run_criterion(6, "data-structure round-trips", [&](Check& c) {
    std::mt19937_64 rng(606);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t k = jtest::uniform(rng, 1, 5);
      std::vector<Variable> vars;
      for (std::size_t j = 0; j < k; ++j)
        vars.push_back({static_cast<VarId>(j), static_cast<std::uint32_t>(jtest::uniform(rng, 1, 6))});
      const auto f = jtest::random_factor(rng, FactorScope(vars), jtest::uniform_real(rng, 0.05, 1.0));
      auto order = f.scope().ids();
      std::shuffle(order.begin(), order.end(), rng);
      const auto expected = permute(f, order);
      c.expect(build_trie(f, order).enumerate(expected.scope()) == expected,
               "trie enumeration differs for factor " + std::to_string(t));
      const auto cards = f.scope().cardinalities();
      const auto total = radix_product(cards);
      for (std::size_t r = 0; r < f.size(); ++r)
        for (auto dir : {Direction::Forward, Direction::Reverse}) {
          const std::vector<Value> tuple(f.row(r).begin(), f.row(r).end());
          const auto idx = encode_index(tuple, cards, dir);
          c.expect(idx < total && decode_index(idx, cards, dir) == tuple, "tuple round-trip");
        }
      for (int q = 0; q < 4; ++q) {
        const auto idx = static_cast<Index>(jtest::uniform(rng, 0, static_cast<std::size_t>(total - 1)));
        for (auto dir : {Direction::Forward, Direction::Reverse})
          c.expect(encode_index(decode_index(idx, cards, dir), cards, dir) == idx, "index round-trip");
      }
    }
    for (int t = 0; t < 1000; ++t) {
      std::vector<std::uint32_t> cards(jtest::uniform(rng, 1, 70));
      for (auto& x : cards) x = static_cast<std::uint32_t>(jtest::uniform(rng, 1, 4));
      bool threw = false;
      try {
        radix_product(cards);
      } catch (const Error& e) {
        threw = e.code() == Errc::IndexOverflow;
      }
      c.expect(threw == exceeds_signed_limit(cards), "overflow decision wrong for trial " + std::to_string(t));
    }
    std::vector<std::uint32_t> edge(62, 2);
    edge.push_back(2);
    c.expect(exceeds_signed_limit(edge), "2^63 must exceed the limit");
    bool threw = false;
    try {
      radix_product(edge);
    } catch (const Error& e) {
      threw = e.code() == Errc::IndexOverflow;
    }
    c.expect(threw, "2^63 accepted");
  });

  failed += run_criterion(7, "hash_product equals sort_merge_product", [&](Check& c) {
    std::mt19937_64 rng(707);
    auto entries = [&](Index domain, double density) {
      std::vector<IndexedEntry> out;
      for (Index i = 0; i < domain; ++i)
        if (jtest::uniform_real(rng, 0, 1) < density) out.push_back({i, jtest::uniform_real(rng, 0.1, 2.0)});
      return out;
    };
    for (int t = 0; t < 500; ++t) {
      const Index domain = jtest::uniform(rng, 1, 300);
      const auto a = entries(domain, jtest::uniform_real(rng, 0.05, 1.0));
      const auto b = entries(domain, jtest::uniform_real(rng, 0.05, 1.0));
      for (auto op : {ProductOp::Multiply, ProductOp::Divide}) {
        const auto merged = sort_merge_product(a, b, op);
        const auto h =
            HashedFactor::from_entries({static_cast<std::uint32_t>(domain)}, Direction::Forward, b);
        auto hashed = a;
        std::shuffle(hashed.begin(), hashed.end(), rng);
        hash_product(h, hashed, op);
        std::sort(hashed.begin(), hashed.end(),
                  [](const IndexedEntry& x, const IndexedEntry& y) { return x.index < y.index; });
        bool same = hashed.size() == merged.size();
        for (std::size_t i = 0; same && i < hashed.size(); ++i)
          same = hashed[i].index == merged[i].index &&
                 std::abs(hashed[i].prob - merged[i].prob) <= 1e-12 * std::max(1.0, merged[i].prob);
        c.expect(same, "pair " + std::to_string(t) + (op == ProductOp::Multiply ? " multiply" : " divide"));
      }
    }
  });

  failed += run_criterion(8, "HYJAR contract and pipeline determinism", [&](Check& c) {
    for (std::size_t i = 0; i < 50; ++i) {
      const auto& pgm = pool[i].pgm;
      const auto g = ghd_for(pgm);
      const auto rho = compute_rho(g, pgm);
      const auto rep = hyjar_select(g, pgm, rho, i);
      c.expect(rep.strategies.size() == g.size(), "map not total for model " + std::to_string(i));
      const auto big = hyjar_select(g, pgm, 2e9, i);
      c.expect(big.random_branch, "random branch not taken above threshold");
      for (auto s : big.strategies) c.expect(s != Strategy::Pairwise, "pairwise above threshold");
      c.expect(big.strategies == hyjar_select(g, pgm, 2e9, i).strategies, "random branch not seed-stable");
    }

    const auto dir = std::filesystem::temp_directory_path() / "joininfer_acceptance";
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& cs = pool[i * 10];
      InferenceOptions opt;
      opt.seed = 1000 + i;
      opt.induce_sparsity = 0.6;
      const auto a = write_marginals(run_inference(cs.pgm, cs.ev, opt).marginals.variables);
      const auto b = write_marginals(run_inference(cs.pgm, cs.ev, opt).marginals.variables);
      c.expect(a == b, "library output differs for model " + std::to_string(i * 10));

      const auto path = (dir / ("m" + std::to_string(i) + ".uai")).string();
      std::ofstream(path) << write_uai(to_network(cs.pgm));
      const std::string args = "infer '" + path + "' --strategy hyjar --seed " + std::to_string(7 + i) +
                               " --induce-sparsity 0.6";
      const auto x = cli_output(args), y = cli_output(args);
      c.expect(x == y && x.find("<exit") == std::string::npos,
               "CLI output differs for model " + std::to_string(i * 10));
    }
  });

  failed += run_criterion(9, "GHD validity on 200 models", [&](Check& c) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& pgm = pool[i].pgm;
      const auto g = ghd_for(pgm);
      const auto issues = validate_ghd(g, pgm);
      c.expect(issues.empty(), "model " + std::to_string(i) + ": " + (issues.empty() ? "" : issues.front()));
      auto in_bag = [&](std::size_t v, VarId x) {
        return std::find(g.chi[v].begin(), g.chi[v].end(), x) != g.chi[v].end();
      };
      // Every factor is assigned to exactly one bag that holds its scope.
      std::vector<int> assigned(pgm.factors.size(), 0);
      for (std::size_t v = 0; v < g.size(); ++v)
        for (auto f : g.alpha[v]) {
          ++assigned[f];
          const auto ids = pgm.factors[f].scope().ids();
          c.expect(std::all_of(ids.begin(), ids.end(), [&](VarId x) { return in_bag(v, x); }),
                   "model " + std::to_string(i) + ": factor assigned outside its scope");
        }
      for (std::size_t f = 0; f < assigned.size(); ++f)
        c.expect(assigned[f] == 1, "model " + std::to_string(i) + ": factor " + std::to_string(f) +
                                       " assigned " + std::to_string(assigned[f]) + " times");
      // Running intersection: the bags holding x form one connected subtree.
      for (VarId x = 0; x < pgm.num_variables(); ++x) {
        std::size_t tops = 0, holders = 0;
        for (std::size_t v = 0; v < g.size(); ++v) {
          if (!in_bag(v, x)) continue;
          ++holders;
          if (v == g.root || !in_bag(g.parent[v], x)) ++tops;
        }
        c.expect(holders > 0 && tops == 1,
                 "model " + std::to_string(i) + ": variable " + std::to_string(x) + " breaks running intersection");
      }
    }
  });

  std::printf("%s: %d of 9 criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
