#pragma once

// UAI network, evidence and marginal files. Dense tables are row-major with the
// last scope variable varying fastest. Tokens are separated by any whitespace.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "joininfer/model.hpp"

namespace joininfer {

struct UaiNetwork {
  enum class Kind { Markov, Bayes };

  Kind kind = Kind::Markov;
  std::vector<std::uint32_t> cardinalities;
  std::vector<std::vector<VarId>> scopes;
  std::vector<std::vector<double>> tables;

  friend bool operator==(const UaiNetwork&, const UaiNetwork&) = default;
};

/// Observed values keyed by variable id.
struct Evidence {
  std::map<VarId, Value> assignments;

  bool empty() const noexcept { return assignments.empty(); }
  std::size_t size() const noexcept { return assignments.size(); }
  friend bool operator==(const Evidence&, const Evidence&) = default;
};

namespace detail {

class Tokens {
 public:
  Tokens(std::string_view text, std::string_view module) : module_(module) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      const std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i > start) tokens_.emplace_back(text.substr(start, i - start));
    }
  }

  bool done() const noexcept { return pos_ >= tokens_.size(); }

  std::string_view next() {
    if (done()) throw Error(Errc::CountMismatch, module_, "unexpected end of input");
    return tokens_[pos_++];
  }

  std::uint64_t next_uint() {
    const std::string tok(next());
    if (tok.empty() || tok[0] == '-' || tok[0] == '+')
      throw Error(Errc::BadToken, module_, "expected a non-negative integer, got '" + tok + "'");
    char* end = nullptr;
    errno = 0;
    const auto v = std::strtoull(tok.c_str(), &end, 10);
    if (*end != '\0' || errno == ERANGE)
      throw Error(Errc::BadToken, module_, "expected a non-negative integer, got '" + tok + "'");
    return v;
  }

  double next_double() {
    const std::string tok(next());
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0' || !std::isfinite(v))
      throw Error(Errc::BadToken, module_, "expected a number, got '" + tok + "'");
    return v;
  }

  void expect_end() const {
    if (!done()) throw Error(Errc::CountMismatch, module_, "trailing tokens");
  }

 private:
  std::string module_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
};

inline std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::uint32_t narrow_u32(std::uint64_t v, std::string_view module, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw Error(Errc::ValueOutOfRange, module, what);
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline UaiNetwork parse_uai(std::string_view text) {
  detail::Tokens t(text, "uai");
  UaiNetwork net;
  if (t.done()) throw Error(Errc::BadHeader, "uai", "empty input");
  const auto header = t.next();
  if (header == "MARKOV")
    net.kind = UaiNetwork::Kind::Markov;
  else if (header == "BAYES")
    net.kind = UaiNetwork::Kind::Bayes;
  else
    throw Error(Errc::BadHeader, "uai", "unknown header '" + std::string(header) + "'");

  const auto n = t.next_uint();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto c = detail::narrow_u32(t.next_uint(), "uai", "cardinality too large");
    if (c == 0) throw Error(Errc::ValueOutOfRange, "uai", "zero cardinality");
    net.cardinalities.push_back(c);
  }
  const auto m = t.next_uint();
  for (std::uint64_t f = 0; f < m; ++f) {
    const auto arity = t.next_uint();
    std::vector<VarId> scope;
    for (std::uint64_t j = 0; j < arity; ++j) {
      const auto id = t.next_uint();
      if (id >= n)
        throw Error(Errc::ValueOutOfRange, "uai", "scope refers to variable " + std::to_string(id));
      if (std::find(scope.begin(), scope.end(), id) != scope.end())
        throw Error(Errc::DuplicateVariable, "uai", "variable repeated in a scope");
      scope.push_back(static_cast<VarId>(id));
    }
    net.scopes.push_back(std::move(scope));
  }
  for (std::uint64_t f = 0; f < m; ++f) {
    double expected = 1.0;
    for (auto x : net.scopes[f]) expected *= net.cardinalities[x];
    const auto count = t.next_uint();
    if (static_cast<double>(count) != expected)
      throw Error(Errc::CountMismatch, "uai",
                  "table " + std::to_string(f) + " has " + std::to_string(count) + " entries");
    std::vector<double> table;
    table.reserve(count);
    for (std::uint64_t j = 0; j < count; ++j) {
      const double p = t.next_double();
      if (p < 0.0) throw Error(Errc::NegativeProbability, "uai", "negative table entry");
      table.push_back(p);
    }
    net.tables.push_back(std::move(table));
  }
  t.expect_end();
  return net;
}

inline std::string write_uai(const UaiNetwork& net) {
  std::string out = net.kind == UaiNetwork::Kind::Markov ? "MARKOV\n" : "BAYES\n";
  out += std::to_string(net.cardinalities.size()) + "\n";
  for (std::size_t i = 0; i < net.cardinalities.size(); ++i)
    out += (i ? " " : "") + std::to_string(net.cardinalities[i]);
  out += "\n" + std::to_string(net.scopes.size()) + "\n";
  for (const auto& s : net.scopes) {
    out += std::to_string(s.size());
    for (auto x : s) out += " " + std::to_string(x);
    out += "\n";
  }
  for (const auto& tbl : net.tables) {
    out += "\n" + std::to_string(tbl.size()) + "\n";
    for (std::size_t i = 0; i < tbl.size(); ++i)
      out += (i ? " " : "") + detail::format_g12(tbl[i]);
    out += "\n";
  }
  return out;
}

inline Evidence parse_evidence(std::string_view text) {
  detail::Tokens t(text, "uai");
  Evidence ev;
  if (t.done()) return ev;
  const auto count = t.next_uint();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto var = detail::narrow_u32(t.next_uint(), "uai", "variable id too large");
    const auto val = detail::narrow_u32(t.next_uint(), "uai", "value too large");
    if (!ev.assignments.emplace(var, val).second)
      throw Error(Errc::DuplicateVariable, "uai",
                  "variable " + std::to_string(var) + " observed twice");
  }
  t.expect_end();
  return ev;
}

inline std::string write_evidence(const Evidence& ev) {
  std::string out = std::to_string(ev.size());
  for (const auto& [var, val] : ev.assignments)
    out += " " + std::to_string(var) + " " + std::to_string(val);
  return out + "\n";
}

/// Listing form of a dense network: zero entries dropped, rows in table order
/// (which is already lexicographic in scope order).
inline Pgm to_listing(const UaiNetwork& net) {
  std::vector<FactorTable> factors;
  factors.reserve(net.scopes.size());
  for (std::size_t f = 0; f < net.scopes.size(); ++f) {
    std::vector<Variable> vars;
    for (auto x : net.scopes[f]) vars.push_back({x, net.cardinalities.at(x)});
    FactorScope scope(std::move(vars));
    const auto cards = scope.cardinalities();
    const auto& tbl = net.tables[f];
    std::vector<Value> values;
    std::vector<double> probs;
    std::vector<Value> tuple(cards.size(), 0);
    for (std::size_t n = 0; n < tbl.size(); ++n) {
      if (tbl[n] < 0.0) throw Error(Errc::NegativeProbability, "uai", "negative table entry");
      if (tbl[n] > 0.0) {
        values.insert(values.end(), tuple.begin(), tuple.end());
        probs.push_back(tbl[n]);
      }
      for (std::size_t i = cards.size(); i-- > 0;) {
        if (++tuple[i] < cards[i]) break;
        tuple[i] = 0;
      }
    }
    factors.push_back(FactorTable::from_sorted(std::move(scope), std::move(values), std::move(probs)));
  }
  return Pgm::make(net.cardinalities, std::move(factors));
}

/// Dense row-major expansion of a listing factor.
inline std::vector<double> to_dense(const FactorTable& f) {
  const auto cards = f.scope().cardinalities();
  std::vector<double> out(static_cast<std::size_t>(f.scope().domain_size()), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::size_t idx = 0;
    const auto r = f.row(i);
    for (std::size_t j = 0; j < cards.size(); ++j) idx = idx * cards[j] + r[j];
    out[idx] = f.prob(i);
  }
  return out;
}

inline UaiNetwork to_network(const Pgm& pgm, UaiNetwork::Kind kind = UaiNetwork::Kind::Markov) {
  UaiNetwork net;
  net.kind = kind;
  for (const auto& v : pgm.variables) net.cardinalities.push_back(v.cardinality);
  for (const auto& f : pgm.factors) {
    net.scopes.push_back(f.scope().ids());
    net.tables.push_back(to_dense(f));
  }
  return net;
}

/// Marginal file: variable count, then one line per variable holding its
/// cardinality followed by its probabilities.
inline std::string write_marginals(std::span<const std::vector<double>> marginals) {
  std::string out = std::to_string(marginals.size());
  for (const auto& m : marginals) {
    out += "\n" + std::to_string(m.size());
    for (double p : m) out += " " + detail::format_g12(p);
  }
  return out + "\n";
}

inline std::vector<std::vector<double>> read_marginals(std::string_view text) {
  detail::Tokens t(text, "uai");
  std::vector<std::vector<double>> out;
  const auto n = t.next_uint();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto card = t.next_uint();
    std::vector<double> m;
    for (std::uint64_t j = 0; j < card; ++j) m.push_back(t.next_double());
    out.push_back(std::move(m));
  }
  t.expect_end();
  return out;
}

}  // namespace joininfer
