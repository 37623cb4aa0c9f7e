#include "ctf/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace ctf {

std::string Diagnostic::format() const {
  std::string out = std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message;
  if (!expected.empty()) {
    out += " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) out += i + 1 == expected.size() ? " or " : ", ";
      out += expected[i];
    }
    out += ")";
  }
  return out;
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) {
    if (!out.empty()) out += "\n";
    out += d.format();
  }
  return out.empty() ? "parse error" : out;
}

}  // namespace

ParseError::ParseError(std::vector<Diagnostic> diagnostics)
    : Error(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

namespace {

// ------------------------------------------------------------------ lexer

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  SourceSpan span;
};

struct Fail {
  Diagnostic diag;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto is_digit = [&](std::size_t k) {
    return k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]));
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourceSpan span{line, col, static_cast<int>(i), 0};
    std::size_t start = i;
    Tok kind = Tok::Punct;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) {
        ++j;
      }
      kind = Tok::Ident;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && is_digit(i + 1)) ||
               (c == '.' && is_digit(i + 1))) {
      std::size_t j = i;
      if (src[j] == '-') ++j;
      while (is_digit(j)) ++j;
      if (j < src.size() && src[j] == '/' && is_digit(j + 1)) {
        ++j;
        while (is_digit(j)) ++j;
      } else if (j < src.size() && src[j] == '.' && is_digit(j + 1)) {
        ++j;
        while (is_digit(j)) ++j;
      }
      kind = Tok::Number;
      advance(j - i);
    } else if (src.substr(i, 3) == "<->") {
      advance(3);
    } else if (src.substr(i, 2) == "->" || src.substr(i, 2) == "..") {
      advance(2);
    } else if (std::string_view("{}()[],:;~=|").find(c) != std::string_view::npos) {
      advance(1);
    } else {
      span.length = 1;
      throw Fail{{span, std::string("unexpected character '") + c + "'", {}}};
    }
    span.length = static_cast<int>(i - start);
    out.push_back({kind, std::string(src.substr(start, i - start)), span});
  }
  SourceSpan end{line, col, static_cast<int>(src.size()), 0};
  out.push_back({Tok::End, "", end});
  return out;
}

// ----------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(int ahead = 0) const {
    std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  bool at_punct(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_ident(const char* word) const { return peek().kind == Tok::Ident && peek().text == word; }
  bool at_end() const { return peek().kind == Tok::End; }

  const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(std::string message, std::vector<std::string> expected = {}) const {
    Diagnostic d{peek().span, std::move(message), std::move(expected)};
    if (d.span.length == 0 && peek().kind == Tok::End) d.message += " at end of input";
    throw Fail{std::move(d)};
  }

  std::string describe(const Token& t) const {
    if (t.kind == Tok::End) return "end of input";
    return "'" + t.text + "'";
  }

  const Token& expect_punct(const char* p, const char* construct) {
    if (!at_punct(p)) {
      fail("unexpected " + describe(peek()) + " in " + construct, {std::string("'") + p + "'"});
    }
    return take();
  }

  void skip_punct(const char* p) {
    if (at_punct(p)) take();
  }

  const Token& expect_ident(const char* construct) {
    if (peek().kind != Tok::Ident) {
      fail("unexpected " + describe(peek()) + " in " + construct, {"identifier"});
    }
    return take();
  }

  void expect_keyword(const char* word, const char* construct) {
    if (!at_ident(word)) {
      fail("unexpected " + describe(peek()) + " in " + construct, {std::string("'") + word + "'"});
    }
    take();
  }

  int expect_int(const char* construct) {
    const Token& t = peek();
    if (t.kind != Tok::Number || t.text.find_first_of("/.") != std::string::npos) {
      fail("unexpected " + describe(t) + " in " + construct, {"integer"});
    }
    try {
      std::size_t used = 0;
      long v = std::stol(t.text, &used);
      if (v < -1'000'000'000L || v > 1'000'000'000L) throw std::out_of_range("int");
    } catch (const std::exception&) {
      fail("integer literal out of range in " + std::string(construct));
    }
    take();
    return std::stoi(t.text);
  }

  Rational expect_rational(const char* construct) {
    const Token& t = peek();
    if (t.kind != Tok::Number) fail("unexpected " + describe(t) + " in " + construct, {"number"});
    Rational r;
    try {
      r = parse_rational(t.text);
    } catch (const Error& e) {
      fail(e.what());
    }
    take();
    return r;
  }

  std::size_t pos_ = 0;

 private:
  std::vector<Token> toks_;
};

// --------------------------------------------------------- model grammar

struct RefUse {
  std::string name;
  SourceSpan span;
};

struct BernTerm {
  std::string placeholder;
  Rational p0;
  Rational slope;
  ExprPtr arg;  // null for the constant form
  SourceSpan span;
};

struct RawVar {
  std::string name;
  SourceSpan span;
  FiniteDomain domain;
  ExprPtr mechanism;
  std::vector<RefUse> refs;
  std::vector<BernTerm> berns;
};

struct RawExo {
  ExogenousFactor factor;
  SourceSpan span;
};

const std::map<std::string, ExprKind>& function_kinds() {
  static const std::map<std::string, ExprKind> kinds = {
      {"not", ExprKind::Not}, {"and", ExprKind::And}, {"or", ExprKind::Or},
      {"xor", ExprKind::Xor}, {"eq", ExprKind::Eq},   {"ge", ExprKind::Ge},
      {"lt", ExprKind::Lt},   {"add", ExprKind::Add}, {"sub", ExprKind::Sub},
      {"mul", ExprKind::Mul}};
  return kinds;
}

const std::vector<std::string>& expr_starts() {
  static const std::vector<std::string> s = {"integer", "identifier", "function call"};
  return s;
}

class ModelParser {
 public:
  explicit ModelParser(Parser& p) : p_(p) {}

  ExprPtr parse_expr(RawVar& var) {
    const Token& t = p_.peek();
    if (t.kind == Tok::Number) return Expr::constant(p_.expect_int("expression"));
    if (t.kind != Tok::Ident) {
      p_.fail("unexpected " + p_.describe(t) + " in expression", expr_starts());
    }
    Token id = p_.take();
    if (!p_.at_punct("(")) {
      var.refs.push_back({id.text, id.span});
      return Expr::ref(id.text);
    }
    p_.take();
    if (id.text == "table") return parse_table(var, id);
    if (id.text == "bern") return parse_bern(var, id);
    auto it = function_kinds().find(id.text);
    if (it == function_kinds().end()) {
      throw Fail{{id.span, "unknown function '" + id.text + "'",
                  {"not", "and", "or", "xor", "eq", "ge", "lt", "add", "sub", "mul", "table",
                   "bern"}}};
    }
    std::vector<ExprPtr> args;
    args.push_back(parse_expr(var));
    while (p_.at_punct(",")) {
      p_.take();
      args.push_back(parse_expr(var));
    }
    p_.expect_punct(")", id.text.c_str());
    ExprKind k = it->second;
    if (k == ExprKind::Not) {
      if (args.size() != 1) throw Fail{{id.span, "not takes exactly one operand", {}}};
      return Expr::unary(k, args[0]);
    }
    bool foldable = k == ExprKind::And || k == ExprKind::Or || k == ExprKind::Xor ||
                    k == ExprKind::Add || k == ExprKind::Mul;
    if (args.size() < 2 || (!foldable && args.size() != 2)) {
      throw Fail{{id.span, id.text + (foldable ? " takes at least two operands"
                                               : " takes exactly two operands"),
                  {}}};
    }
    ExprPtr acc = Expr::binary(k, args[0], args[1]);
    for (std::size_t i = 2; i < args.size(); ++i) acc = Expr::binary(k, acc, args[i]);
    return acc;
  }

  ExprPtr parse_table(RawVar& var, const Token& id) {
    std::vector<std::string> inputs;
    while (true) {
      const Token& in = p_.expect_ident("table inputs");
      var.refs.push_back({in.text, in.span});
      if (std::find(inputs.begin(), inputs.end(), in.text) != inputs.end()) {
        throw Fail{{in.span, "table input '" + in.text + "' listed twice", {}}};
      }
      inputs.push_back(in.text);
      if (!p_.at_punct(",")) break;
      p_.take();
    }
    p_.expect_punct(";", "table");
    std::map<std::vector<int>, int> rows;
    while (!p_.at_punct(")")) {
      SourceSpan row_span = p_.peek().span;
      std::vector<int> key;
      for (std::size_t k = 0; k < inputs.size(); ++k) key.push_back(p_.expect_int("table row"));
      p_.expect_punct("->", "table row");
      int out = p_.expect_int("table row");
      if (!rows.emplace(key, out).second) throw Fail{{row_span, "duplicate table row", {}}};
      if (!p_.at_punct(",")) break;
      p_.take();
    }
    p_.expect_punct(")", "table");
    (void)id;
    return Expr::table(std::move(inputs), std::move(rows));
  }

  ExprPtr parse_bern(RawVar& var, const Token& id) {
    BernTerm b;
    b.span = id.span;
    b.p0 = p_.expect_rational("bern");
    b.slope = 0;
    ExprPtr arg;
    if (p_.at_punct(",")) {
      p_.take();
      b.slope = p_.expect_rational("bern");
      p_.expect_punct(",", "bern");
      arg = parse_expr(var);
    }
    p_.expect_punct(")", "bern");
    if (!arg && (b.p0 < 0 || b.p0 > 1)) {
      throw Fail{{id.span, "bern probability must lie in [0, 1]", {}}};
    }
    b.arg = arg;
    b.placeholder = "\x01" + std::to_string(counter_++);
    var.berns.push_back(b);
    return Expr::ref(b.placeholder);
  }

  FiniteDomain parse_domain() {
    SourceSpan at = p_.peek().span;
    p_.expect_punct("{", "domain");
    std::vector<int> values;
    int first = p_.expect_int("domain");
    if (p_.at_punct("..")) {
      p_.take();
      int last = p_.expect_int("domain range");
      p_.expect_punct("}", "domain");
      if (last < first) throw Fail{{at, "empty domain range", {}}};
      if (static_cast<long>(last) - first > 100000) throw Fail{{at, "domain range too large", {}}};
      return FiniteDomain::range(first, last);
    }
    values.push_back(first);
    while (p_.at_punct(",")) {
      p_.take();
      values.push_back(p_.expect_int("domain"));
    }
    p_.expect_punct("}", "domain");
    std::vector<int> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Fail{{at, "domain lists a value twice", {}}};
    }
    return FiniteDomain(std::move(values));
  }

  RawExo parse_exo() {
    RawExo out;
    const Token& name = p_.expect_ident("exo declaration");
    out.factor.name = name.text;
    out.span = name.span;
    p_.expect_punct("~", "exo declaration");
    const Token& dist = p_.peek();
    if (p_.at_ident("bernoulli")) {
      p_.take();
      p_.expect_punct("(", "bernoulli");
      Rational q = p_.expect_rational("bernoulli");
      p_.expect_punct(")", "bernoulli");
      out.factor.support = FiniteDomain({0, 1});
      out.factor.pmf = {1 - q, q};
    } else if (p_.at_ident("uniform")) {
      p_.take();
      p_.expect_punct("(", "uniform");
      int lo = p_.expect_int("uniform");
      p_.expect_punct(",", "uniform");
      int hi = p_.expect_int("uniform");
      p_.expect_punct(")", "uniform");
      if (hi < lo) throw Fail{{dist.span, "uniform range is empty", {}}};
      if (static_cast<long>(hi) - lo > 1'000'000) throw Fail{{dist.span, "uniform range too large", {}}};
      out.factor.support = FiniteDomain::range(lo, hi);
      out.factor.pmf.assign(hi - lo + 1, Rational(1, hi - lo + 1));
    } else if (p_.at_ident("pmf")) {
      p_.take();
      p_.expect_punct("{", "pmf");
      std::map<int, Rational> masses;
      while (true) {
        SourceSpan at = p_.peek().span;
        int v = p_.expect_int("pmf entry");
        p_.expect_punct(":", "pmf entry");
        Rational m = p_.expect_rational("pmf entry");
        if (!masses.emplace(v, m).second) throw Fail{{at, "pmf lists a value twice", {}}};
        if (!p_.at_punct(",")) break;
        p_.take();
      }
      p_.expect_punct("}", "pmf");
      std::vector<int> vals;
      for (const auto& [v, m] : masses) {
        vals.push_back(v);
        out.factor.pmf.push_back(m);
      }
      out.factor.support = FiniteDomain(std::move(vals));
    } else {
      p_.fail("unexpected " + p_.describe(dist) + " in exo declaration",
              {"bernoulli", "uniform", "pmf"});
    }
    return out;
  }

  RawVar parse_var() {
    RawVar v;
    const Token& name = p_.expect_ident("var declaration");
    v.name = name.text;
    v.span = name.span;
    p_.expect_punct(":", "var declaration");
    v.domain = parse_domain();
    p_.expect_punct("=", "var declaration");
    v.mechanism = parse_expr(v);
    return v;
  }

 private:
  Parser& p_;
  int counter_ = 0;
};

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& subst) {
  if (e->kind == ExprKind::Ref) {
    auto it = subst.find(e->name);
    return it == subst.end() ? e : it->second;
  }
  if (e->args.empty()) return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto& a : copy->args) a = substitute(a, subst);
  return copy;
}

bool fits_int(const Rational& r) {
  return r.get_den() == 1 && r.get_num() >= -1'000'000'000 && r.get_num() <= 1'000'000'000;
}

}  // namespace

ModelParse parse_model_checked(std::string_view text) {
  ModelParse result;
  std::vector<RawExo> exos;
  std::vector<RawVar> vars;
  std::string model_name;
  SourceSpan model_span, close_span;
  try {
    Parser p(lex(text));
    ModelParser mp(p);
    model_span = p.peek().span;
    p.expect_keyword("model", "model header");
    model_name = p.expect_ident("model header").text;
    p.expect_punct("{", "model header");
    while (!p.at_punct("}")) {
      if (p.at_ident("exo")) {
        p.take();
        exos.push_back(mp.parse_exo());
      } else if (p.at_ident("var")) {
        p.take();
        vars.push_back(mp.parse_var());
      } else {
        p.fail("unexpected " + p.describe(p.peek()) + " in model body", {"exo", "var", "'}'"});
      }
      p.skip_punct(";");
    }
    close_span = p.take().span;
    if (!p.at_end()) p.fail("unexpected " + p.describe(p.peek()) + " after model", {"end of input"});
  } catch (const Fail& f) {
    result.diagnostics.push_back(f.diag);
    return result;
  }

  auto& diags = result.diagnostics;
  if (vars.empty()) {
    diags.push_back({close_span, "at least one variable required", {"var"}});
    return result;
  }

  std::map<std::string, SourceSpan> declared;
  for (const auto& e : exos) {
    if (!declared.emplace(e.factor.name, e.span).second) {
      diags.push_back({e.span, "duplicate name '" + e.factor.name + "'", {}});
    }
  }
  for (const auto& v : vars) {
    if (!declared.emplace(v.name, v.span).second) {
      diags.push_back({v.span, "duplicate name '" + v.name + "'", {}});
    }
  }
  for (const auto& v : vars) {
    for (const auto& r : v.refs) {
      if (!declared.count(r.name)) {
        diags.push_back({r.span, "unknown variable '" + r.name + "' in mechanism of '" + v.name + "'", {}});
      }
    }
  }
  for (const auto& e : exos) {
    Rational total = 0;
    bool negative = false;
    for (const auto& m : e.factor.pmf) {
      total += m;
      negative = negative || m < 0;
    }
    if (negative) diags.push_back({e.span, "negative mass in pmf of '" + e.factor.name + "'", {}});
    if (total != 1) {
      diags.push_back({e.span, "pmf of '" + e.factor.name + "' sums to " + to_string(total) +
                                   ", not 1", {}});
    }
  }
  if (!diags.empty()) return result;

  // Desugar bern terms into auxiliary uniform factors.
  std::set<std::string> taken;
  for (const auto& [n, s] : declared) taken.insert(n);
  std::vector<ExogenousFactor> factors;
  for (auto& e : exos) factors.push_back(e.factor);
  std::map<std::string, SourceSpan> aux_span;
  for (auto& v : vars) {
    if (v.berns.empty()) continue;
    std::map<std::string, ExprPtr> subst;
    for (const auto& b : v.berns) {
      std::string name = "U_" + v.name;
      for (int k = 2; taken.count(name); ++k) name = "U_" + v.name + "_" + std::to_string(k);
      taken.insert(name);
      aux_span[name] = b.span;
      mpz_class L = lcm(b.p0.get_den(), b.slope.get_den());
      Rational base = b.p0 * Rational(L);
      Rational step = b.slope * Rational(L);
      if (L > 1'000'000 || !fits_int(base) || !fits_int(step)) {
        diags.push_back({b.span, "bern parameters need too many atoms", {}});
        continue;
      }
      int l = static_cast<int>(L.get_si());
      ExogenousFactor aux{name, FiniteDomain::range(0, l - 1),
                          std::vector<Rational>(l, Rational(1, l))};
      factors.push_back(aux);
      ExprPtr threshold = Expr::constant(static_cast<int>(base.get_num().get_si()));
      if (b.arg) {
        threshold = Expr::binary(
            ExprKind::Add,
            Expr::binary(ExprKind::Mul, b.arg, Expr::constant(static_cast<int>(step.get_num().get_si()))),
            threshold);
      }
      subst[b.placeholder] = Expr::binary(ExprKind::Lt, Expr::ref(name), threshold);
    }
    v.mechanism = substitute(v.mechanism, subst);
  }
  if (!diags.empty()) return result;

  std::vector<EndogenousVar> endo;
  for (const auto& v : vars) endo.push_back({v.name, v.domain, v.mechanism});
  try {
    Scm scm(model_name, std::move(factors), std::move(endo));
    auto report = validate(scm);
    for (const auto& viol : report.violations) {
      SourceSpan at = model_span;
      if (auto it = declared.find(viol.subject); it != declared.end()) at = it->second;
      if (auto it = aux_span.find(viol.subject); it != aux_span.end()) at = it->second;
      diags.push_back({at, std::string(violation_kind_name(viol.kind)) + " violation in '" +
                               viol.subject + "': " + viol.detail, {}});
    }
    if (diags.empty()) result.model.emplace(std::move(scm));
  } catch (const ModelError& e) {
    diags.push_back({model_span, e.what(), {}});
  }
  return result;
}

Scm parse_model(std::string_view text) {
  auto r = parse_model_checked(text);
  if (!r.model) throw ParseError(std::move(r.diagnostics));
  return std::move(*r.model);
}

// -------------------------------------------------------------- printing

std::string format_expr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Const:
      return std::to_string(e.value);
    case ExprKind::Ref:
      return e.name;
    case ExprKind::Table: {
      std::string out = "table(";
      for (std::size_t i = 0; i < e.inputs.size(); ++i) out += (i ? ", " : "") + e.inputs[i];
      out += ";";
      bool first = true;
      for (const auto& [key, v] : e.rows) {
        out += first ? " " : ", ";
        first = false;
        for (int k : key) out += std::to_string(k) + " ";
        out += "-> " + std::to_string(v);
      }
      return out + ")";
    }
    default:
      break;
  }
  std::string out = std::string(kind_name(e.kind)) + "(";
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    out += (i ? ", " : "") + format_expr(*e.args[i]);
  }
  return out + ")";
}

namespace {

bool contiguous(const FiniteDomain& d) { return d.values().back() - d.values().front() + 1 == d.size(); }

std::string format_domain(const FiniteDomain& d) {
  if (d.size() > 2 && contiguous(d)) {
    return "{" + std::to_string(d.values().front()) + ".." + std::to_string(d.values().back()) + "}";
  }
  std::string out = "{";
  for (int i = 0; i < d.size(); ++i) out += (i ? ", " : "") + std::to_string(d[i]);
  return out + "}";
}

std::string format_dist(const ExogenousFactor& u) {
  if (u.support == FiniteDomain({0, 1})) return "bernoulli(" + to_string(u.pmf[1]) + ")";
  bool uniform = contiguous(u.support);
  for (const auto& m : u.pmf) uniform = uniform && m == Rational(1, u.support.size());
  if (uniform) {
    return "uniform(" + std::to_string(u.support.values().front()) + ", " +
           std::to_string(u.support.values().back()) + ")";
  }
  std::string out = "pmf{";
  for (int i = 0; i < u.support.size(); ++i) {
    out += (i ? ", " : "") + std::to_string(u.support[i]) + ": " + to_string(u.pmf[i]);
  }
  return out + "}";
}

}  // namespace

std::string format_model(const Scm& scm) {
  std::string out = "model " + scm.name() + " {\n";
  for (const auto& u : scm.exogenous()) out += "  exo " + u.name + " ~ " + format_dist(u) + "\n";
  for (const auto& v : scm.endogenous()) {
    out += "  var " + v.name + " : " + format_domain(v.domain) + " = " + format_expr(*v.mechanism) + "\n";
  }
  return out + "}\n";
}

// ---------------------------------------------------------------- queries

namespace {

Intervention parse_context(Parser& p) {
  Intervention ctx;
  p.expect_punct("[", "intervention context");
  while (!p.at_punct("]")) {
    const Token& name = p.expect_ident("intervention context");
    p.expect_punct("=", "intervention context");
    int v = p.expect_int("intervention context");
    if (!ctx.emplace(name.text, v).second) {
      throw Fail{{name.span, "variable '" + name.text + "' intervened twice in one context", {}}};
    }
    if (!p.at_punct(",")) break;
    p.take();
  }
  p.expect_punct("]", "intervention context");
  return ctx;
}

}  // namespace

CtfQuery parse_query(std::string_view text) {
  try {
    Parser p(lex(text));
    CtfQuery q;
    p.expect_keyword("P", "query");
    p.expect_punct("(", "query");
    std::set<std::pair<std::string, Intervention>> seen;
    while (true) {
      const Token& name = p.expect_ident("event");
      Intervention ctx;
      if (p.at_punct("[")) ctx = parse_context(p);
      p.expect_punct("=", "event");
      int v = p.expect_int("event");
      if (!seen.emplace(name.text, ctx).second) {
        throw Fail{{name.span, "variable '" + name.text + "' appears twice in one context", {}}};
      }
      q.events.push_back({name.text, v, std::move(ctx)});
      if (!p.at_punct(",")) break;
      p.take();
    }
    if (p.at_punct("|")) {
      p.take();
      std::set<std::string> cond_seen;
      while (true) {
        const Token& name = p.expect_ident("conditioning event");
        if (p.at_punct("[")) {
          p.fail("conditioning events must be factual", {"'='"});
        }
        p.expect_punct("=", "conditioning event");
        int v = p.expect_int("conditioning event");
        if (!cond_seen.insert(name.text).second) {
          throw Fail{{name.span, "variable '" + name.text + "' conditioned twice", {}}};
        }
        q.conditioning.emplace_back(name.text, v);
        if (!p.at_punct(",")) break;
        p.take();
      }
    }
    p.expect_punct(")", "query");
    if (!p.at_end()) p.fail("unexpected " + p.describe(p.peek()) + " after query", {"end of input"});
    return q;
  } catch (const Fail& f) {
    throw ParseError({f.diag});
  }
}

std::string format_query(const CtfQuery& q) {
  std::string out = "P(";
  for (std::size_t i = 0; i < q.events.size(); ++i) {
    const auto& e = q.events[i];
    out += (i ? ", " : "") + e.var;
    if (!e.context.empty()) {
      out += "[";
      bool first = true;
      for (const auto& [n, v] : e.context) {
        out += (first ? "" : ", ") + n + "=" + std::to_string(v);
        first = false;
      }
      out += "]";
    }
    out += "=" + std::to_string(e.value);
  }
  if (!q.conditioning.empty()) {
    out += " | ";
    for (std::size_t i = 0; i < q.conditioning.size(); ++i) {
      out += (i ? ", " : "") + q.conditioning[i].first + "=" + std::to_string(q.conditioning[i].second);
    }
  }
  return out + ")";
}

void check_query(const Scm& scm, const CtfQuery& q) {
  if (q.events.empty()) throw QueryError("query has no events");
  auto check = [&](const std::string& var, int value) {
    auto i = scm.endo_index(var);
    if (!i) throw QueryError("unknown variable '" + var + "' in query");
    if (!scm.endogenous()[*i].domain.contains(value)) {
      throw QueryError("value " + std::to_string(value) + " outside the domain of '" + var + "'");
    }
  };
  for (const auto& e : q.events) {
    check(e.var, e.value);
    for (const auto& [n, v] : e.context) check(n, v);
  }
  for (const auto& [n, v] : q.conditioning) check(n, v);
}

// --------------------------------------------------------------- diagrams

CausalDiagram parse_diagram(std::string_view text) {
  try {
    Parser p(lex(text));
    p.expect_keyword("diagram", "diagram header");
    p.expect_ident("diagram header");
    p.expect_punct("{", "diagram header");
    std::vector<std::string> nodes;
    struct Edge {
      std::string a, b;
      bool bidirected;
      SourceSpan span;
    };
    std::vector<Edge> edges;
    auto note = [&](const std::string& n) {
      if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
    };
    while (!p.at_punct("}")) {
      if (p.at_ident("nodes") && p.peek(1).kind == Tok::Ident) {
        p.take();
        while (true) {
          const Token& n = p.expect_ident("nodes statement");
          if (std::find(nodes.begin(), nodes.end(), n.text) != nodes.end()) {
            throw Fail{{n.span, "node '" + n.text + "' declared twice", {}}};
          }
          nodes.push_back(n.text);
          if (!p.at_punct(",")) break;
          p.take();
        }
      } else {
        const Token& a = p.expect_ident("edge");
        bool bi;
        if (p.at_punct("->")) {
          bi = false;
        } else if (p.at_punct("<->")) {
          bi = true;
        } else {
          p.fail("unexpected " + p.describe(p.peek()) + " in edge", {"'->'", "'<->'"});
        }
        p.take();
        const Token& b = p.expect_ident("edge");
        if (a.text == b.text) throw Fail{{a.span, "self loop on '" + a.text + "'", {}}};
        note(a.text);
        note(b.text);
        edges.push_back({a.text, b.text, bi, a.span});
      }
      p.skip_punct(";");
    }
    p.take();
    if (!p.at_end()) p.fail("unexpected " + p.describe(p.peek()) + " after diagram", {"end of input"});
    CausalDiagram g(nodes);
    for (const auto& e : edges) {
      if (e.bidirected) {
        g.add_bidirected(e.a, e.b);
      } else {
        g.add_directed(e.a, e.b);
      }
    }
    if (!g.acyclic()) throw Fail{{SourceSpan{}, "diagram has a directed cycle", {}}};
    return g;
  } catch (const Fail& f) {
    throw ParseError({f.diag});
  }
}

std::string format_diagram(const CausalDiagram& g, const std::string& name) {
  std::string out = "diagram " + name + " {\n  nodes ";
  for (int i = 0; i < g.size(); ++i) out += (i ? ", " : "") + g.nodes()[i];
  out += ";\n";
  for (const auto& [a, b] : g.directed()) out += "  " + g.nodes()[a] + " -> " + g.nodes()[b] + ";\n";
  for (const auto& [a, b] : g.bidirected()) out += "  " + g.nodes()[a] + " <-> " + g.nodes()[b] + ";\n";
  return out + "}\n";
}

}  // namespace ctf
