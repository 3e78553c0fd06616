#include <gtest/gtest.h>

#include <map>
#include <set>

#include "support.hpp"

using namespace joininfer;
using jtest::scope_of;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

}  // namespace

TEST(MakeFactor, BuildsRows) {
  const auto f = make_factor(scope_of({{0, 2}}), {{{0}, 0.3}, {{1}, 0.7}});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_DOUBLE_EQ(f.prob(0), 0.3);
  EXPECT_DOUBLE_EQ(f.prob(1), 0.7);
}

TEST(MakeFactor, DropsZeros) {
  const auto f = make_factor(scope_of({{0, 2}}), {{{0}, 0.0}, {{1}, 1.0}});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f.row(0)[0], 1u);
}

TEST(MakeFactor, RejectsDuplicates) {
  EXPECT_EQ(code_of([] { make_factor(scope_of({{0, 2}}), {{{0}, 0.5}, {{0}, 0.5}}); }),
            Errc::DuplicateTuple);
}

TEST(MakeFactor, RejectsBadEntries) {
  EXPECT_EQ(code_of([] { make_factor(scope_of({{0, 2}}), {{{2}, 0.5}}); }), Errc::ValueOutOfRange);
  EXPECT_EQ(code_of([] { make_factor(scope_of({{0, 2}}), {{{0}, -0.5}}); }),
            Errc::NegativeProbability);
  EXPECT_EQ(code_of([] { make_factor(scope_of({{0, 2}}), {{{0, 1}, 0.5}}); }), Errc::ArityMismatch);
  EXPECT_EQ(code_of([] { scope_of({{0, 2}, {0, 2}}); }), Errc::DuplicateVariable);
  EXPECT_EQ(code_of([] { scope_of({{0, 0}}); }), Errc::ValueOutOfRange);
}

TEST(MakeFactor, SortsUnderScopeOrder) {
  const auto f = make_factor(scope_of({{3, 2}, {1, 3}}),
                             {{{1, 0}, 0.1}, {{0, 2}, 0.2}, {{0, 1}, 0.3}, {{1, 2}, 0.4}});
  ASSERT_EQ(f.size(), 4u);
  std::vector<std::vector<Value>> rows;
  for (std::size_t i = 0; i < f.size(); ++i) rows.emplace_back(f.row(i).begin(), f.row(i).end());
  EXPECT_EQ(rows, (std::vector<std::vector<Value>>{{0, 1}, {0, 2}, {1, 0}, {1, 2}}));
  EXPECT_DOUBLE_EQ(f.lookup(std::vector<Value>{0, 2}), 0.2);
  EXPECT_DOUBLE_EQ(f.lookup(std::vector<Value>{1, 1}), 0.0);
}

TEST(FactorSparsity, Examples) {
  const auto full = FactorTable::constant(scope_of({{0, 2}, {1, 2}}), 0.25);
  EXPECT_DOUBLE_EQ(factor_sparsity(full), 1.0);
  const auto half = make_factor(scope_of({{0, 2}, {1, 2}}), {{{0, 0}, 0.5}, {{1, 1}, 0.5}});
  EXPECT_DOUBLE_EQ(factor_sparsity(half), 0.5);
}

TEST(FactorSparsity, CelarStylePairwise) {
  // 387 rows over a 44 x 44 domain.
  std::vector<FactorEntry> entries;
  for (Value i = 0; i < 44 && entries.size() < 387; ++i)
    for (Value j = 0; j < 44 && entries.size() < 387; ++j)
      if ((i * 7 + j * 3) % 5 == 0) entries.push_back({{i, j}, 1.0});
  for (Value i = 0; i < 44 && entries.size() < 387; ++i)
    for (Value j = 0; j < 44 && entries.size() < 387; ++j)
      if ((i * 7 + j * 3) % 5 == 1) entries.push_back({{i, j}, 1.0});
  ASSERT_EQ(entries.size(), 387u);
  const auto f = make_factor(scope_of({{0, 44}, {1, 44}}), entries);
  EXPECT_NEAR(factor_sparsity(f), 0.1999, 1e-4);
}

TEST(Marginalize, Uniform) {
  const auto f = FactorTable::constant(scope_of({{0, 2}, {1, 2}}), 0.25);
  const auto m = marginalize(f, scope_of({{0, 2}}));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.prob(0), 0.5);
  EXPECT_DOUBLE_EQ(m.prob(1), 0.5);
}

TEST(Marginalize, FullScopeIsIdentity) {
  const auto f = make_factor(scope_of({{0, 2}, {1, 3}}), {{{0, 2}, 0.1}, {{1, 0}, 0.9}});
  EXPECT_EQ(marginalize(f, f.scope()), f);
}

TEST(Marginalize, SumsOutLeadingVariable) {
  const auto f = make_factor(scope_of({{0, 2}, {1, 2}}),
                             {{{0, 0}, 0.1}, {{0, 1}, 0.2}, {{1, 0}, 0.3}});
  const auto m = marginalize(f, scope_of({{1, 2}}));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m.prob(0), 0.4, 1e-15);
  EXPECT_NEAR(m.prob(1), 0.2, 1e-15);
}

TEST(Marginalize, EmptyKeepGivesScalar) {
  const auto f = make_factor(scope_of({{0, 2}}), {{{0}, 0.25}, {{1}, 0.5}});
  const auto m = marginalize(f, FactorScope());
  EXPECT_EQ(m.arity(), 0u);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_DOUBLE_EQ(m.prob(0), 0.75);
}

TEST(Marginalize, RejectsForeignVariable) {
  const auto f = make_factor(scope_of({{0, 2}}), {{{0}, 1.0}});
  EXPECT_EQ(code_of([&] { marginalize(f, scope_of({{5, 2}})); }), Errc::KeepNotSubset);
}

TEST(ZeroOneProjection, PrunesToSupport) {
  const auto g = make_factor(scope_of({{1, 2}, {2, 2}, {3, 2}}),
                             {{{0, 0, 0}, 0.3}, {{0, 0, 1}, 0.5}, {{1, 1, 0}, 0.2}});
  const VarId onto[] = {1, 2};
  const auto p = zero_one_projection(g, onto);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.scope(), scope_of({{1, 2}, {2, 2}}));
  EXPECT_EQ(std::vector<Value>(p.row(0).begin(), p.row(0).end()), (std::vector<Value>{0, 0}));
  EXPECT_EQ(std::vector<Value>(p.row(1).begin(), p.row(1).end()), (std::vector<Value>{1, 1}));
  EXPECT_EQ(p.prob(0), 1.0);
  EXPECT_EQ(p.prob(1), 1.0);
}

TEST(ZeroOneProjection, SupersetAndDense) {
  const auto f = make_factor(scope_of({{0, 2}, {1, 3}}), {{{0, 2}, 0.1}, {{1, 0}, 0.9}});
  const VarId all[] = {0, 1, 7};
  const auto p = zero_one_projection(f, all);
  EXPECT_EQ(p.size(), f.size());
  for (double x : p.probs()) EXPECT_EQ(x, 1.0);

  const auto dense = FactorTable::constant(scope_of({{0, 2}, {1, 3}, {2, 2}}), 0.5);
  const VarId some[] = {2, 1};
  const auto q = zero_one_projection(dense, some);
  EXPECT_EQ(q, FactorTable::constant(scope_of({{1, 3}, {2, 2}}), 1.0));
}

TEST(ZeroOneProjection, DisjointFails) {
  const auto f = make_factor(scope_of({{0, 2}}), {{{0}, 1.0}});
  const VarId other[] = {3};
  EXPECT_EQ(code_of([&] { zero_one_projection(f, other); }), Errc::EmptyIntersection);
}

TEST(Permute, ReordersAndSorts) {
  const auto f = make_factor(scope_of({{0, 2}, {1, 3}}),
                             {{{0, 2}, 0.1}, {{1, 0}, 0.2}, {{1, 1}, 0.3}});
  const VarId order[] = {1, 0};
  const auto p = permute(f, order);
  EXPECT_EQ(p.scope(), scope_of({{1, 3}, {0, 2}}));
  EXPECT_DOUBLE_EQ(p.prob(0), 0.2);  // (0,1)
  EXPECT_DOUBLE_EQ(p.prob(1), 0.3);  // (1,1)
  EXPECT_DOUBLE_EQ(p.prob(2), 0.1);  // (2,0)
}

TEST(Pgm, ValidatesScopes) {
  std::vector<std::uint32_t> cards{2, 2};
  auto f = make_factor(scope_of({{0, 2}, {1, 3}}), {{{0, 0}, 1.0}});
  EXPECT_EQ(code_of([&] { Pgm::make(cards, {f}); }), Errc::ValueOutOfRange);
  auto g = make_factor(scope_of({{4, 2}}), {{{0}, 1.0}});
  EXPECT_EQ(code_of([&] { Pgm::make(cards, {g}); }), Errc::ValueOutOfRange);
}

// Properties over random factors.

namespace {

FactorTable random_table(std::mt19937_64& rng) {
  const std::size_t arity = jtest::uniform(rng, 1, 4);
  std::vector<Variable> vars;
  std::vector<VarId> pool{0, 1, 2, 3, 4, 5};
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t i = 0; i < arity; ++i)
    vars.push_back({pool[i], static_cast<std::uint32_t>(jtest::uniform(rng, 1, 4))});
  return jtest::random_factor(rng, FactorScope(vars), jtest::uniform_real(rng, 0.1, 1.0));
}

std::vector<VarId> random_subset(std::mt19937_64& rng, std::vector<VarId> ids) {
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(jtest::uniform(rng, 0, ids.size()));
  return ids;
}

}  // namespace

TEST(ModelProperties, MarginalizePreservesMassAndComposes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto f = random_table(rng);
    const auto k1 = random_subset(rng, f.scope().ids());
    const auto k2 = random_subset(rng, k1);
    const auto m1 = marginalize(f, k1);
    const auto m2 = marginalize(m1, k2);
    const auto direct = marginalize(f, k2);
    EXPECT_NEAR(m1.total(), f.total(), 1e-12 * std::max(1.0, f.total()));
    ASSERT_EQ(m2.size(), direct.size());
    EXPECT_EQ(m2.values().size(), direct.values().size());
    EXPECT_TRUE(std::equal(m2.values().begin(), m2.values().end(), direct.values().begin()));
    EXPECT_LE(jtest::factor_diff(m2, direct), 1e-12);

    // Brute-force summation oracle.
    std::map<std::vector<Value>, double> oracle;
    const auto pos = detail::positions_in(f.scope(), k1);
    for (std::size_t i = 0; i < f.size(); ++i) {
      std::vector<Value> key;
      for (auto p : pos) key.push_back(f.row(i)[p]);
      oracle[key] += f.prob(i);
    }
    ASSERT_EQ(oracle.size(), m1.size());
    std::size_t i = 0;
    for (const auto& [key, p] : oracle) {
      EXPECT_TRUE(std::equal(key.begin(), key.end(), m1.row(i).begin()));
      EXPECT_NEAR(m1.prob(i), p, 1e-12);
      ++i;
    }
  }
}

TEST(ModelProperties, ProjectionMatchesDeduplicatedSupport) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto f = random_table(rng);
    auto onto = random_subset(rng, f.scope().ids());
    if (onto.empty()) continue;
    const auto p = zero_one_projection(f, onto);
    std::set<std::vector<Value>> support;
    std::vector<std::size_t> pos;
    for (std::size_t j = 0; j < f.arity(); ++j)
      if (std::find(onto.begin(), onto.end(), f.scope()[j].id) != onto.end()) pos.push_back(j);
    for (std::size_t i = 0; i < f.size(); ++i) {
      std::vector<Value> key;
      for (auto q : pos) key.push_back(f.row(i)[q]);
      support.insert(key);
    }
    ASSERT_EQ(p.size(), support.size());
    std::size_t i = 0;
    for (const auto& key : support) {
      EXPECT_TRUE(std::equal(key.begin(), key.end(), p.row(i).begin()));
      EXPECT_EQ(p.prob(i), 1.0);
      ++i;
    }
  }
}

TEST(ModelProperties, SparsityRange) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const auto f = random_table(rng);
    if (f.empty()) continue;
    const double s = factor_sparsity(f);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s == 1.0, static_cast<double>(f.size()) == f.scope().domain_size());
  }
}
