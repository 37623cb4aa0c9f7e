#include <doctest.h>

#include "ctf/datasets.hpp"
#include "ctf/dsl.hpp"
#include "oracles.hpp"

using namespace ctf;

namespace {

bool mentions(const std::vector<Diagnostic>& ds, const std::string& text) {
  for (const auto& d : ds) {
    if (d.message.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("empty model is rejected") {
  auto r = parse_model_checked("model m { }");
  CHECK_FALSE(r.model);
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].message.find("at least one variable required") != std::string::npos);
}

TEST_CASE("unknown reference is named with its span") {
  const char* text =
      "model m {\n"
      "  exo U_F ~ bernoulli(1/2)\n"
      "  var F : {0,1} = xor(U_F, U_Q)\n"
      "}\n";
  auto r = parse_model_checked(text);
  CHECK_FALSE(r.model);
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(mentions(r.diagnostics, "U_Q"));
  CHECK(r.diagnostics[0].span.line == 3);
  CHECK(r.diagnostics[0].span.column == 28);
  CHECK(r.diagnostics[0].span.length == 3);
  CHECK_THROWS_AS(parse_model(text), ParseError);
}

TEST_CASE("semantic errors") {
  CHECK(mentions(parse_model_checked("model m { exo U ~ bernoulli(1/2) var X : {0,1} = U var X : {0,1} = U }").diagnostics,
                 "duplicate"));
  CHECK(mentions(parse_model_checked("model m { exo U ~ pmf{0: 1/2, 1: 1/3} var X : {0,1} = U }").diagnostics, "sum"));
  auto syntax = parse_model_checked("model m { var X : {0,1} = and(1 }");
  CHECK_FALSE(syntax.model);
  CHECK_FALSE(syntax.diagnostics[0].expected.empty());
}

TEST_CASE("face model text parses to the expected table") {
  const char* text =
      "model face_mstar {\n"
      "  exo U_F ~ bernoulli(0.4)\n"
      "  exo U_Y ~ bernoulli(2/5)\n"
      "  exo U_H1 ~ bernoulli(2/5)\n"
      "  exo U_H2 ~ bernoulli(1/5)\n"
      "  var F : {0,1} = xor(U_F, U_Y)\n"
      "  var Y : {0,1} = U_Y\n"
      "  var H : {0,1} = xor(and(not(Y), U_H1), and(Y, U_H2))  # gray hair\n"
      "}\n";
  auto m = parse_model(text);
  CHECK(m == load_builtin("face_mstar"));
  auto t = oracle::observational(m);
  CHECK(t.at({0, 0, 0}) == Rational(27, 125));
  CHECK(t.at({1, 1, 1}) == Rational(6, 125));
}

TEST_CASE("bern desugars to a threshold on a uniform factor") {
  auto m = parse_model(
      "model c { exo U_D ~ uniform(0, 9) var D : {0..9} = U_D var C : {0,1} = bern(1/20, 1/10, D) }");
  auto idx = m.exo_index("U_C");
  REQUIRE(idx);
  CHECK(m.exogenous()[*idx].support.size() == 20);
  auto t = oracle::observational(m);
  for (int d = 0; d < 10; ++d) {
    CHECK(t[{d, 1}] / Rational(1, 10) == Rational(1, 20) + Rational(d, 10));
  }
  auto named = parse_model("model c { exo U_C ~ bernoulli(1/2) var C : {0,1} = bern(1/4) var E : {0,1} = U_C }");
  CHECK(named.exo_index("U_C_2"));
}

TEST_CASE("queries") {
  auto q = parse_query("P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)");
  REQUIRE(q.events.size() == 2);
  CHECK(q.events[0].var == "F");
  CHECK(q.events[0].context == Intervention{{"Y", 0}});
  CHECK(q.conditioning.size() == 3);
  CHECK(format_query(q) == "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)");
  CHECK(parse_query(format_query(q)).events.size() == 2);
  auto bare = parse_query("P(B[D=6]=0 | D=3, C=1, B=1)");
  CHECK(bare.events[0].context.at("D") == 6);
  CHECK_THROWS_AS(parse_query("P(F[Y=0, Y=1]=0)"), ParseError);
  CHECK_THROWS_AS(parse_query("P(F=)"), ParseError);
  CHECK_THROWS_AS(parse_query("P(F=0 | Y[X=1]=0)"), ParseError);
  CHECK_THROWS_AS(parse_query("P(F=0 | Y=0, Y=1)"), ParseError);
}

TEST_CASE("diagrams round trip") {
  auto g = parse_diagram("diagram face { nodes F, Y, H; Y -> H; F <-> Y; }");
  CHECK(g.nodes() == std::vector<std::string>{"F", "Y", "H"});
  CHECK(g == induce_diagram(load_builtin("face_mstar")));
  CHECK(parse_diagram(format_diagram(g)) == g);
  auto implicit = parse_diagram("diagram d { A -> B B <-> C }");
  CHECK(implicit.nodes() == std::vector<std::string>{"A", "B", "C"});
  CHECK_THROWS_AS(parse_diagram("diagram d { A -> }"), ParseError);
}

TEST_CASE("built-in sources round trip") {
  for (const auto& b : builtin_models()) {
    auto m = load_builtin(b.name);
    CHECK(parse_model(format_model(m)) == m);
    CHECK(format_model(parse_model(format_model(m))) == format_model(m));
  }
}

TEST_CASE("500 random models round trip through the formatter") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    Scm m = oracle::random_text_model(rng, i);
    std::string text = format_model(m);
    auto back = parse_model_checked(text);
    REQUIRE_MESSAGE(back.model, text);
    CHECK(*back.model == m);
    CHECK(format_model(*back.model) == text);
    ++checked;
  }
  CHECK(checked == 500);
}

}  // TEST_SUITE
