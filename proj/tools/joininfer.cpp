// joininfer: exact marginal inference over UAI models.
//
//   joininfer infer MODEL.uai [--evidence F] [--engine joininfer|brute] ...
//   joininfer bench MODEL.uai --strategies multiway,pairwise --repeats 5
//
// Exit codes: 0 success, 1 usage, 2 model error, 3 resource error.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "joininfer/joininfer.hpp"

namespace {

using namespace joininfer;

constexpr int kExitUsage = 1;
constexpr int kExitModel = 2;
constexpr int kExitResource = 3;

struct CommonArgs {
  std::string model;
  std::string evidence;
  std::string strategy = "hyjar";
  std::uint64_t seed = 0;
  double induce_sparsity = 0.0;  // 0 = off
  double timeout = 0.0;          // 0 = none
  double proj_density_threshold = 0.9;
  double rho_threshold = 1e9;
  unsigned threads = 1;
  unsigned hyjar_trials = 1;
  bool normalize_messages = false;
  bool no_singleton = false;
};

struct InferArgs {
  std::string engine = "joininfer";
  std::string out;
  std::string stats_out;
  bool stats = false;
};

struct BenchArgs {
  std::vector<std::string> strategies{"multiway"};
  unsigned repeats = 5;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "io", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(Errc::InvalidArgument, "io", "cannot write '" + path + "'");
}

void add_common(CLI::App& cmd, CommonArgs& a) {
  cmd.add_option("model", a.model, "UAI network file")->required();
  cmd.add_option("--evidence", a.evidence, "UAI evidence file");
  cmd.add_option("--strategy", a.strategy, "hyjar|multiway|multiway01|pairwise")
      ->check(CLI::IsMember({"hyjar", "multiway", "multiway01", "pairwise"}));
  cmd.add_option("--seed", a.seed, "seed for sparsity induction and HYJAR (JOININFER_SEED overrides)");
  cmd.add_option("--induce-sparsity", a.induce_sparsity, "keep this fraction of each factor's domain")
      ->check(CLI::Range(0.0, 1.0));
  cmd.add_option("--timeout", a.timeout, "wall-clock budget in seconds")->check(CLI::NonNegativeNumber);
  cmd.add_option("--proj-density-threshold", a.proj_density_threshold,
                 "skip 01-projections denser than this");
  cmd.add_option("--rho-threshold", a.rho_threshold, "HYJAR timing threshold on rho");
  cmd.add_option("--threads", a.threads, "bags processed concurrently per tree level")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--hyjar-trials", a.hyjar_trials, "timed runs per kernel (median)")
      ->check(CLI::PositiveNumber);
  cmd.add_flag("--normalize-messages", a.normalize_messages, "rescale messages to avoid underflow");
  cmd.add_flag("--no-singleton-consistency", a.no_singleton, "skip support-based value fixing");
}

InferenceOptions to_options(const CommonArgs& a) {
  InferenceOptions opt;
  opt.strategy = *parse_strategy_mode(a.strategy);
  opt.seed = a.seed;
  if (const char* env = std::getenv("JOININFER_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw Error(Errc::InvalidArgument, "cli", "JOININFER_SEED is not an integer");
    opt.seed = v;
  }
  if (a.induce_sparsity > 0.0) opt.induce_sparsity = a.induce_sparsity;
  if (a.timeout > 0.0) opt.timeout_seconds = a.timeout;
  opt.projection_density_threshold = a.proj_density_threshold;
  opt.rho_threshold = a.rho_threshold;
  opt.threads = a.threads;
  opt.hyjar_trials = a.hyjar_trials;
  opt.normalize_messages = a.normalize_messages;
  opt.singleton_consistency = !a.no_singleton;
  return opt;
}

struct Loaded {
  Pgm pgm;
  Evidence ev;
};

Loaded load(const CommonArgs& a) {
  Loaded l{to_listing(parse_uai(read_file(a.model))), {}};
  if (!a.evidence.empty()) l.ev = parse_evidence(read_file(a.evidence));
  return l;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string opt_value(const std::optional<double>& v) {
  return v ? fmt("%.6g", *v) : std::string("unavailable");
}

std::string format_stats(const InferenceStats& st) {
  std::ostringstream o;
  std::size_t counts[3] = {0, 0, 0};
  for (auto s : st.strategies) ++counts[static_cast<int>(s)];
  o << "variables=" << st.variables << "\n"
    << "factors=" << st.factors << "\n"
    << "inferred_evidence=" << st.inferred_evidence << "\n"
    << "bags=" << st.bags << "\n"
    << "tw=" << st.max_bag << "\n"
    << "htw=unavailable\n"
    << "fhtw=" << opt_value(st.fhtw) << "\n"
    << "rho=" << fmt("%.6g", st.rho) << "\n"
    << "rj=" << opt_value(st.rj) << "\n"
    << "rd=" << opt_value(st.rd) << "\n"
    << "hyjar_branch=" << (st.hyjar_random ? "random" : "timed") << "\n"
    << "bags_multiway=" << counts[0] << "\n"
    << "bags_multiway01=" << counts[1] << "\n"
    << "bags_pairwise=" << counts[2] << "\n"
    << "seek_count=" << st.totals.seek_count << "\n"
    << "emit_count=" << st.totals.emit_count << "\n"
    << "backtrack_count=" << st.totals.backtrack_count << "\n"
    << "peak_intermediate=" << st.totals.peak_intermediate << "\n"
    << "projection_cache_hits=" << st.projection_cache_hits << "\n"
    << "projection_cache_misses=" << st.projection_cache_misses << "\n"
    << "seconds_preprocess=" << fmt("%.6f", st.seconds_preprocess) << "\n"
    << "seconds_decompose=" << fmt("%.6f", st.seconds_decompose) << "\n"
    << "seconds_select=" << fmt("%.6f", st.seconds_select) << "\n"
    << "seconds_up=" << fmt("%.6f", st.seconds_up) << "\n"
    << "seconds_down=" << fmt("%.6f", st.seconds_down) << "\n"
    << "seconds_total=" << fmt("%.6f", st.seconds_total) << "\n\n";

  char line[256];
  std::snprintf(line, sizeof line, "%5s %5s %-10s %6s %5s %10s %12s %12s %10s %12s %10s\n", "bag",
                "|chi|", "strategy", "inputs", "proj", "rows", "seeks", "emits", "backtracks",
                "agm", "seconds");
  o << line;
  for (std::size_t v = 0; v < st.bag_stats.size(); ++v) {
    const auto& b = st.bag_stats[v];
    const std::string agm = v < st.bag_agm.size() ? fmt("%.4g", st.bag_agm[v]) : "-";
    std::snprintf(line, sizeof line,
                  "%5zu %5zu %-10s %6zu %5zu %10zu %12" PRIu64 " %12" PRIu64 " %10" PRIu64
                  " %12s %10.6f\n",
                  v, st.bag_sizes[v], strategy_name(b.strategy), b.input_factors, b.projections,
                  b.product_rows, b.counters.seek_count, b.counters.emit_count,
                  b.counters.backtrack_count, agm.c_str(), b.seconds);
    o << line;
  }
  return o.str();
}

int run_infer(const CommonArgs& a, const InferArgs& ia) {
  auto [pgm, ev] = load(a);
  auto opt = to_options(a);
  std::string text;
  if (ia.engine == "brute") {
    const Pgm model = opt.induce_sparsity ? induce_sparsity(pgm, *opt.induce_sparsity, opt.seed) : pgm;
    text = write_marginals(brute_force_marginals(model, ev).variables);
  } else {
    opt.compute_widths = ia.stats;
    const auto res = run_inference(pgm, ev, opt);
    text = write_marginals(res.marginals.variables);
    if (ia.stats) {
      const auto s = format_stats(res.stats);
      if (ia.stats_out.empty())
        std::cerr << s;
      else
        write_file(ia.stats_out, s);
    }
  }
  if (ia.out.empty())
    std::cout << text;
  else
    write_file(ia.out, text);
  return 0;
}

/// FNV-1a over the marginals printed at 9 decimals: equal across kernels that
/// agree to well within the output precision.
std::uint64_t checksum(const std::vector<std::vector<double>>& ms) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& m : ms) {
    for (double p : m) feed(fmt("%.9f ", p));
    feed("\n");
  }
  return h;
}

int run_bench(const CommonArgs& a, const BenchArgs& ba) {
  auto [pgm, ev] = load(a);
  std::cout << "strategy,repeats,mean_seconds,seek_count,emit_count,backtrack_count,"
               "peak_intermediate,checksum\n";
  for (const auto& name : ba.strategies) {
    auto mode = parse_strategy_mode(name);
    if (!mode) throw Error(Errc::InvalidArgument, "cli", "unknown strategy '" + name + "'");
    auto opt = to_options(a);
    opt.strategy = *mode;
    double seconds = 0.0;
    InferenceResult last;
    for (unsigned r = 0; r < ba.repeats; ++r) {
      last = run_inference(pgm, ev, opt);
      seconds += last.stats.seconds_total;
    }
    const auto& t = last.stats.totals;
    char row[256];
    std::snprintf(row, sizeof row, "%s,%u,%.6f,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64
                  ",%016" PRIx64 "\n",
                  name.c_str(), ba.repeats, seconds / ba.repeats, t.seek_count, t.emit_count,
                  t.backtrack_count, t.peak_intermediate, checksum(last.marginals.variables));
    std::cout << row;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact marginal inference with join-based message passing"};
  app.require_subcommand(1);

  CommonArgs infer_common, bench_common;
  InferArgs ia;
  BenchArgs ba;

  auto* infer = app.add_subcommand("infer", "compute variable marginals (.mar on stdout)");
  add_common(*infer, infer_common);
  infer->add_option("--engine", ia.engine, "joininfer|brute")
      ->check(CLI::IsMember({"joininfer", "brute"}));
  infer->add_flag("--stats", ia.stats, "print widths, predictors and per-bag counters");
  infer->add_option("--stats-out", ia.stats_out, "write stats here instead of stderr");
  infer->add_option("--out", ia.out, "write marginals here instead of stdout");

  auto* bench = app.add_subcommand("bench", "time strategies, CSV on stdout");
  add_common(*bench, bench_common);
  bench->add_option("--strategies", ba.strategies, "comma-separated strategies")->delimiter(',');
  bench->add_option("--repeats", ba.repeats, "runs per strategy")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (infer->parsed()) {
      if (ia.stats_out.size()) ia.stats = true;
      return run_infer(infer_common, ia);
    }
    return run_bench(bench_common, ba);
  } catch (const Error& e) {
    if (e.code() == Errc::Timeout) std::cerr << "joininfer: timeout: " << e.what() << "\n";
    else std::cerr << "joininfer: " << e.what() << "\n";
    return is_resource_error(e.code()) ? kExitResource : kExitModel;
  } catch (const std::bad_alloc&) {
    std::cerr << "joininfer: out of memory\n";
    return kExitResource;
  }
}
