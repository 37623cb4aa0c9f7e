#include <doctest.h>

#include "ctf/bounds.hpp"
#include "ctf/datasets.hpp"
#include "ctf/dsl.hpp"
#include "oracles.hpp"

using namespace ctf;

namespace {

struct Setup {
  Scm model;
  Distribution obs;
  CausalDiagram g;
  Domains d;
};

Setup setup(const Scm& m) { return {m, observational(m), induce_diagram(m), domains_of(m)}; }

Setup setup(const std::string& builtin) { return setup(load_builtin(builtin)); }

const char* kFaceQuery = "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)";
const char* kTask1 = "P(C[D=6]=1, B[D=6]=1 | D=3, C=1, B=1)";

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("c-components") {
  auto s = setup("backdoor");
  CHECK(c_components(s.g) == std::vector<std::vector<int>>{{0, 1}, {2}});
  auto f = setup("face_mprime");
  CHECK(c_components(f.g) == std::vector<std::vector<int>>{{0, 1, 2}});
}

TEST_CASE("response type counts") {
  auto f = setup("face_mstar");
  CHECK(response_type_count("H", f.g, f.d) == 4);
  CHECK(response_type_count("F", f.g, f.d) == 2);
  auto types = response_types("H", f.g, f.d);
  CHECK(types.size() == 4);
  CHECK(types[1] == std::vector<int>{1, 0});
  auto b = setup("backdoor");
  CHECK(response_type_count("B", b.g, b.d) == (1u << 20));
  CHECK_THROWS_AS(response_types("B", b.g, b.d), Error);
}

TEST_CASE("relevant cells") {
  auto b = setup("backdoor");
  auto cells = project_relevant_cells(parse_query(kTask1), b.g, b.d);
  CHECK(cells.cells.at("B") == std::vector<std::vector<int>>{{3, 1}, {6, 1}});
  CHECK_FALSE(cells.conflicting);
  auto f = setup("face_mstar");
  auto fc = project_relevant_cells(parse_query(kFaceQuery), f.g, f.d);
  CHECK(fc.cells.at("H") == std::vector<std::vector<int>>{{0}, {1}});
  auto clash = project_relevant_cells(parse_query("P(H=1 | H=0)"), f.g, f.d);
  CHECK(clash.conflicting);
}

TEST_CASE("face constraints") {
  auto f = setup("face_mstar");
  auto comps = build_constraints(f.obs, f.g, f.d);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].members == std::vector<std::string>{"F", "Y"});
  CHECK(comps[0].num_types == 4);
  CHECK(comps[1].members == std::vector<std::string>{"H"});
  CHECK(comps[1].num_types == 4);
  for (const auto& c : comps) CHECK(feasible_vertex(c.rows));
  // The true model's response-type distribution satisfies the H rows:
  // h(0) = U_H1 and h(1) = U_H2 independently.
  auto lp = comps[1].rows;
  std::vector<Rational> truth;
  for (const auto& t : response_types("H", f.g, f.d)) {
    truth.push_back((t[0] ? Rational(2, 5) : Rational(3, 5)) * (t[1] ? Rational(1, 5) : Rational(4, 5)));
  }
  for (const auto& r : lp.rows) {
    Rational lhs = 0;
    for (const auto& [j, c] : r.terms) lhs += c * truth[j];
    CHECK(lhs == r.rhs);
  }
}

TEST_CASE("face query bounds with witnesses") {
  auto f = setup("face_mstar");
  auto q = parse_query(kFaceQuery);
  auto r = optimal_bounds(f.obs, f.g, f.d, q);
  CHECK(r.lower == Rational(1, 4));
  CHECK(r.upper == Rational(1, 2));
  CHECK(r.certified);
  REQUIRE(r.lower_witness);
  REQUIRE(r.upper_witness);
  for (const auto& w : {r.lower_witness, r.upper_witness}) CHECK(observational(*w, {"F", "Y", "H"}) == f.obs);
  CHECK(conditional_ctf(*r.lower_witness, q) == Rational(1, 4));
  CHECK(conditional_ctf(*r.upper_witness, q) == Rational(1, 2));
  auto a = analytic_bounds(f.obs, f.g, f.d, q);
  CHECK(a.lower == r.lower);
  CHECK(a.upper == r.upper);
  auto js = r.to_json(q);
  CHECK(js["lower"] == "1/4");
  CHECK(js["certified"] == true);
  // The same query on face_mprime sits at one point.
  auto p = setup("face_mprime");
  auto rp = optimal_bounds(p.obs, p.g, p.d, q);
  CHECK(rp.lower == 0);
  CHECK(rp.upper == 0);
}

TEST_CASE("backdoor task 1 against the analytic form") {
  auto b = setup("backdoor");
  auto q = parse_query(kTask1);
  auto r = optimal_bounds(b.obs, b.g, b.d, q);
  CHECK(r.lower == 0);
  CHECK(r.upper == Rational(14, 41));
  CHECK(r.certified);
  auto a = analytic_bounds(b.obs, b.g, b.d, q);
  CHECK(a.lower == r.lower);
  CHECK(a.upper == r.upper);
  Rational truth = conditional_ctf(b.model, q);
  CHECK(truth == Rational(5, 41));
  // Frechet on B's responses at (3,1) and (6,1), divided by the first.
  Rational p31 = b.obs.prob(Assignment{{"D", 3}, {"C", 1}, {"B", 1}}) / b.obs.prob(Assignment{{"D", 3}, {"C", 1}});
  Rational p61 = b.obs.prob(Assignment{{"D", 6}, {"C", 1}, {"B", 1}}) / b.obs.prob(Assignment{{"D", 6}, {"C", 1}});
  auto fr = oracle::frechet(p31, p61);
  CHECK(a.lower == fr.first / p31);
  CHECK(a.upper == fr.second / p31);
}

TEST_CASE("analytic pattern limits") {
  auto fd = setup("frontdoor");
  CHECK_THROWS_AS(analytic_bounds(fd.obs, fd.g, fd.d, parse_query("P(C[D=2]=0, B[D=2]=1 | D=7, C=0, B=1)")),
                  PatternMismatch);
  auto b = setup("backdoor");
  auto same = analytic_bounds(b.obs, b.g, b.d, parse_query("P(B[C=1]=1 | D=3, C=1, B=1)"));
  CHECK(same.lower == 1);
  CHECK(same.upper == 1);
  auto zero = analytic_bounds(b.obs, b.g, b.d, parse_query("P(C[D=6]=0, B[D=6]=1 | D=3, C=1, B=1)"));
  CHECK(zero.upper == 0);
}

TEST_CASE("unidentified c-factor") {
  // Z copies X, so P(X=0, Z=1) = 0 and the {X, Y} factor at Z=1 is undefined.
  auto m = parse_model(
      "model u { exo U_A ~ bernoulli(1/2) var X : {0,1} = U_A var Z : {0,1} = X "
      "var Y : {0,1} = xor(Z, U_A) }");
  auto s = setup(m);
  CHECK_THROWS_AS(optimal_bounds(s.obs, s.g, s.d, parse_query("P(Y[Z=1]=1 | X=0)")), UnidentifiedError);
}

TEST_CASE("frontdoor bilinear case") {
  auto fd = setup("frontdoor");
  auto q = parse_query("P(C[D=2]=0, B[D=2]=0 | D=7, C=0, B=1)");
  auto r = optimal_bounds(fd.obs, fd.g, fd.d, q);
  CHECK(r.method == "bilinear");
  CHECK(r.certified);
  CHECK(r.lower == 0);
  CHECK(r.upper == 0);
  CHECK(conditional_ctf(fd.model, q) == 0);
}

TEST_CASE("random models: bounds contain the truth and the oracle") {
  std::mt19937_64 rng(31);
  int certified = 0;
  for (int t = 0; t < 60; ++t) {
    auto s = setup(oracle::random_scm(rng, 3));
    auto q = oracle::random_query(rng, s.model);
    Rational truth = oracle::conditional(s.model, q);
    BoundOptions opts;
    opts.witnesses = false;
    BoundResult r;
    try {
      r = optimal_bounds(s.obs, s.g, s.d, q, opts);
    } catch (const UnidentifiedError&) {
      continue;
    }
    CHECK(r.lower <= r.upper);
    if (!r.certified) continue;
    ++certified;
    CHECK_MESSAGE(r.lower <= truth, format_query(q));
    CHECK_MESSAGE(truth <= r.upper, format_query(q));
    auto inner = oracle_inner_bounds(s.obs, s.g, s.d, q, 12, 1000 + t);
    if (inner.samples > 0) {
      CHECK(r.lower <= inner.lower);
      CHECK(inner.upper <= r.upper);
    }
  }
  CHECK(certified >= 40);
}

TEST_CASE("random models: projection leaves the bounds unchanged") {
  std::mt19937_64 rng(32);
  int compared = 0;
  for (int t = 0; t < 60 && compared < 25; ++t) {
    auto s = setup(oracle::random_scm(rng, 3));
    std::uint64_t total = 0;
    for (const auto& v : s.g.nodes()) total += response_type_count(v, s.g, s.d);
    if (total > 64) continue;
    auto q = oracle::random_query(rng, s.model);
    BoundOptions full;
    full.project = false;
    full.witnesses = false;
    BoundOptions proj = full;
    proj.project = true;
    try {
      auto a = optimal_bounds(s.obs, s.g, s.d, q, full);
      auto b = optimal_bounds(s.obs, s.g, s.d, q, proj);
      if (!a.certified || !b.certified) continue;
      CHECK(a.lower == b.lower);
      CHECK(a.upper == b.upper);
      ++compared;
    } catch (const UnidentifiedError&) {
    }
  }
  CHECK(compared >= 10);
}

TEST_CASE("random models: analytic agrees with the optimum where it applies") {
  std::mt19937_64 rng(33);
  int applied = 0;
  for (int t = 0; t < 200; ++t) {
    auto s = setup(oracle::random_scm(rng, 3));
    auto q = oracle::random_query(rng, s.model);
    // Full factual conditioning from a positive world.
    auto all = oracle::atoms(s.model);
    auto world = oracle::solve(s.model, all[t % all.size()].first, {});
    q.conditioning.clear();
    for (const auto& v : s.model.endogenous_names()) q.conditioning.emplace_back(v, world.at(v));
    for (auto& e : q.events) e.context = q.events[0].context;
    BoundResult a;
    try {
      a = analytic_bounds(s.obs, s.g, s.d, q);
    } catch (const PatternMismatch&) {
      continue;
    }
    BoundOptions opts;
    opts.witnesses = false;
    auto r = optimal_bounds(s.obs, s.g, s.d, q, opts);
    REQUIRE(r.certified);
    CHECK_MESSAGE(a.lower == r.lower, format_query(q));
    CHECK_MESSAGE(a.upper == r.upper, format_query(q));
    ++applied;
  }
  CHECK(applied >= 10);
}

}  // TEST_SUITE
