#include "ctf/model.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>

namespace ctf {

namespace {

constexpr int kMissing = std::numeric_limits<int>::min();

}  // namespace

// ---------------------------------------------------------------- domains

FiniteDomain::FiniteDomain(std::vector<int> values) : values_(std::move(values)) {
  if (values_.empty()) throw ModelError("domain must be non-empty");
  std::sort(values_.begin(), values_.end());
  if (std::adjacent_find(values_.begin(), values_.end()) != values_.end()) {
    throw ModelError("domain contains a duplicate value");
  }
}

FiniteDomain FiniteDomain::range(int lo, int hi) {
  if (hi < lo) throw ModelError("empty range domain");
  std::vector<int> v;
  for (int i = lo; i <= hi; ++i) v.push_back(i);
  return FiniteDomain(std::move(v));
}

bool FiniteDomain::contains(int v) const { return position(v) >= 0; }

int FiniteDomain::position(int v) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), v);
  if (it == values_.end() || *it != v) return -1;
  return static_cast<int>(it - values_.begin());
}

// ------------------------------------------------------------ expressions

ExprPtr Expr::constant(int v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Const;
  e->value = v;
  return e;
}

ExprPtr Expr::ref(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Ref;
  e->name = std::move(name);
  return e;
}

ExprPtr Expr::unary(ExprKind kind, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->args = {std::move(a)};
  return e;
}

ExprPtr Expr::binary(ExprKind kind, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr Expr::table(std::vector<std::string> inputs, std::map<std::vector<int>, int> rows) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Table;
  e->inputs = std::move(inputs);
  e->rows = std::move(rows);
  return e;
}

void Expr::collect_refs(std::set<std::string>& out) const {
  if (kind == ExprKind::Ref) out.insert(name);
  if (kind == ExprKind::Table) out.insert(inputs.begin(), inputs.end());
  for (const auto& a : args) a->collect_refs(out);
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case ExprKind::Const:
      return a.value == b.value;
    case ExprKind::Ref:
      return a.name == b.name;
    case ExprKind::Table:
      return a.inputs == b.inputs && a.rows == b.rows;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_expr(a.args[i], b.args[i])) return false;
  }
  return true;
}

bool same_expr(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

const char* kind_name(ExprKind kind) {
  switch (kind) {
    case ExprKind::Const: return "const";
    case ExprKind::Ref: return "ref";
    case ExprKind::Not: return "not";
    case ExprKind::And: return "and";
    case ExprKind::Or: return "or";
    case ExprKind::Xor: return "xor";
    case ExprKind::Eq: return "eq";
    case ExprKind::Ge: return "ge";
    case ExprKind::Lt: return "lt";
    case ExprKind::Add: return "add";
    case ExprKind::Sub: return "sub";
    case ExprKind::Mul: return "mul";
    case ExprKind::Table: return "table";
  }
  return "?";
}

// -------------------------------------------------------------------- Scm

Scm::Scm(std::string name, std::vector<ExogenousFactor> exogenous,
         std::vector<EndogenousVar> endogenous)
    : name_(std::move(name)), exogenous_(std::move(exogenous)), endogenous_(std::move(endogenous)) {
  std::sort(exogenous_.begin(), exogenous_.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  std::set<std::string> names;
  for (const auto& u : exogenous_) {
    if (!names.insert(u.name).second) throw ModelError("duplicate name '" + u.name + "'");
    if (u.pmf.size() != static_cast<std::size_t>(u.support.size())) {
      throw ModelError("pmf of '" + u.name + "' does not match its support");
    }
  }
  for (const auto& v : endogenous_) {
    if (!names.insert(v.name).second) throw ModelError("duplicate name '" + v.name + "'");
    if (!v.mechanism) throw ModelError("variable '" + v.name + "' has no mechanism");
    if (v.domain.size() == 0) throw ModelError("variable '" + v.name + "' has an empty domain");
  }

  const int n = num_endogenous();
  compiled_.resize(n);
  endo_refs_.resize(n);
  exo_refs_.resize(n);
  for (int i = 0; i < n; ++i) {
    std::set<std::string> refs;
    endogenous_[i].mechanism->collect_refs(refs);
    for (const auto& r : refs) {
      if (auto e = endo_index(r)) {
        endo_refs_[i].push_back(*e);
      } else if (auto x = exo_index(r)) {
        exo_refs_[i].push_back(*x);
      } else {
        throw ModelError("mechanism of '" + endogenous_[i].name + "' references unknown name '" +
                         r + "'");
      }
    }
    std::sort(endo_refs_[i].begin(), endo_refs_[i].end());
    std::sort(exo_refs_[i].begin(), exo_refs_[i].end());
    compiled_[i].root = compile(*endogenous_[i].mechanism, compiled_[i], i);
  }

  // Kahn, smallest declaration index first.
  std::vector<int> indegree(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int p : endo_refs_[i]) {
      if (p != i) ++indegree[i];
    }
  }
  std::vector<bool> self_loop(n, false);
  for (int i = 0; i < n; ++i) {
    self_loop[i] = std::binary_search(endo_refs_[i].begin(), endo_refs_[i].end(), i);
  }
  std::set<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0 && !self_loop[i]) ready.insert(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (int c = 0; c < n; ++c) {
      if (c != v && std::binary_search(endo_refs_[c].begin(), endo_refs_[c].end(), v)) {
        if (--indegree[c] == 0 && !self_loop[c]) ready.insert(c);
      }
    }
  }
  if (static_cast<int>(order.size()) == n) topo_ = std::move(order);
}

std::optional<int> Scm::endo_index(const std::string& name) const {
  for (int i = 0; i < num_endogenous(); ++i) {
    if (endogenous_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<int> Scm::exo_index(const std::string& name) const {
  auto it = std::lower_bound(exogenous_.begin(), exogenous_.end(), name,
                             [](const ExogenousFactor& u, const std::string& n) { return u.name < n; });
  if (it == exogenous_.end() || it->name != name) return std::nullopt;
  return static_cast<int>(it - exogenous_.begin());
}

int Scm::require_endo(const std::string& name) const {
  auto i = endo_index(name);
  if (!i) throw ModelError("unknown endogenous variable '" + name + "'");
  return *i;
}

std::vector<std::string> Scm::endogenous_names() const {
  std::vector<std::string> out;
  for (const auto& v : endogenous_) out.push_back(v.name);
  return out;
}

std::uint64_t Scm::atom_count() const {
  std::uint64_t total = 1;
  for (const auto& u : exogenous_) {
    auto s = static_cast<std::uint64_t>(u.support.size());
    if (total > std::numeric_limits<std::uint64_t>::max() / s) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= s;
  }
  return total;
}

const FiniteDomain* Scm::slot_domain(int slot) const {
  const int n = num_endogenous();
  return slot < n ? &endogenous_[slot].domain : &exogenous_[slot - n].support;
}

int Scm::compile(const Expr& e, Compiled& out, int var) {
  Node node{e.kind};
  auto slot_of = [&](const std::string& name) {
    if (auto i = endo_index(name)) return *i;
    if (auto x = exo_index(name)) return num_endogenous() + *x;
    throw ModelError("mechanism of '" + endogenous_[var].name + "' references unknown name '" +
                     name + "'");
  };
  switch (e.kind) {
    case ExprKind::Const:
      node.value = e.value;
      break;
    case ExprKind::Ref:
      node.slot = slot_of(e.name);
      break;
    case ExprKind::Table: {
      CompiledTable t;
      std::int64_t stride = 1;
      t.strides.assign(e.inputs.size(), 0);
      for (std::size_t k = e.inputs.size(); k-- > 0;) {
        int s = slot_of(e.inputs[k]);
        t.strides[k] = stride;
        stride *= slot_domain(s)->size();
        if (stride > 50'000'000) {
          throw ModelError("table in '" + endogenous_[var].name + "' is too large");
        }
      }
      for (const auto& in : e.inputs) {
        int s = slot_of(in);
        t.slots.push_back(s);
        t.domains.push_back(*slot_domain(s));
      }
      t.outputs.assign(static_cast<std::size_t>(stride), kMissing);
      for (const auto& [key, outv] : e.rows) {
        if (key.size() != e.inputs.size()) {
          throw ModelError("table row arity mismatch in '" + endogenous_[var].name + "'");
        }
        std::int64_t idx = 0;
        bool valid = true;
        for (std::size_t k = 0; k < key.size(); ++k) {
          int pos = t.domains[k].position(key[k]);
          if (pos < 0) {
            valid = false;
            break;
          }
          idx += pos * t.strides[k];
        }
        // Rows outside the input domains can never fire.
        if (valid) t.outputs[idx] = outv;
      }
      node.table = static_cast<int>(out.tables.size());
      out.tables.push_back(std::move(t));
      break;
    }
    default:
      if (!e.args.empty()) node.a = compile(*e.args[0], out, var);
      if (e.args.size() > 1) node.b = compile(*e.args[1], out, var);
      break;
  }
  out.nodes.push_back(node);
  return static_cast<int>(out.nodes.size()) - 1;
}

int Scm::eval_node(const Compiled& c, int idx, std::span<const int> slots) const {
  const Node& n = c.nodes[idx];
  auto boolean = [&](int v) {
    if (v != 0 && v != 1) {
      throw EvalError(std::string("boolean operator '") + kind_name(n.kind) +
                      "' received operand " + std::to_string(v));
    }
    return v;
  };
  switch (n.kind) {
    case ExprKind::Const:
      return n.value;
    case ExprKind::Ref:
      return slots[n.slot];
    case ExprKind::Not:
      return 1 - boolean(eval_node(c, n.a, slots));
    case ExprKind::And:
      return boolean(eval_node(c, n.a, slots)) & boolean(eval_node(c, n.b, slots));
    case ExprKind::Or:
      return boolean(eval_node(c, n.a, slots)) | boolean(eval_node(c, n.b, slots));
    case ExprKind::Xor:
      return boolean(eval_node(c, n.a, slots)) ^ boolean(eval_node(c, n.b, slots));
    case ExprKind::Eq:
      return eval_node(c, n.a, slots) == eval_node(c, n.b, slots) ? 1 : 0;
    case ExprKind::Ge:
      return eval_node(c, n.a, slots) >= eval_node(c, n.b, slots) ? 1 : 0;
    case ExprKind::Lt:
      return eval_node(c, n.a, slots) < eval_node(c, n.b, slots) ? 1 : 0;
    case ExprKind::Add:
      return eval_node(c, n.a, slots) + eval_node(c, n.b, slots);
    case ExprKind::Sub:
      return eval_node(c, n.a, slots) - eval_node(c, n.b, slots);
    case ExprKind::Mul:
      return eval_node(c, n.a, slots) * eval_node(c, n.b, slots);
    case ExprKind::Table: {
      const CompiledTable& t = c.tables[n.table];
      std::int64_t off = 0;
      for (std::size_t k = 0; k < t.slots.size(); ++k) {
        int pos = t.domains[k].position(slots[t.slots[k]]);
        if (pos < 0) throw EvalError("table input outside its domain");
        off += pos * t.strides[k];
      }
      int v = t.outputs[off];
      if (v == kMissing) throw EvalError("table has no row for this input combination");
      return v;
    }
  }
  return 0;
}

int Scm::evaluate(int var, std::span<const int> slots) const {
  return eval_node(compiled_[var], compiled_[var].root, slots);
}

Scm::Fixed Scm::resolve(const Intervention& x) const {
  Fixed fixed(endogenous_.size());
  for (const auto& [name, value] : x) {
    int i = require_endo(name);
    if (!endogenous_[i].domain.contains(value)) {
      throw ModelError("intervention value " + std::to_string(value) + " outside the domain of '" +
                       name + "'");
    }
    fixed[i] = value;
  }
  return fixed;
}

void Scm::solve_into(std::span<const int> u, const Fixed& fixed, std::span<int> slots) const {
  if (!acyclic()) throw ModelError("cannot solve a cyclic model");
  const int n = num_endogenous();
  std::copy(u.begin(), u.end(), slots.begin() + n);
  for (int v : topo_) {
    slots[v] = fixed[v] ? *fixed[v] : evaluate(v, slots);
  }
}

bool operator==(const Scm& a, const Scm& b) {
  if (a.name_ != b.name_ || a.exogenous_ != b.exogenous_) return false;
  if (a.endogenous_.size() != b.endogenous_.size()) return false;
  for (std::size_t i = 0; i < a.endogenous_.size(); ++i) {
    const auto& x = a.endogenous_[i];
    const auto& y = b.endogenous_[i];
    if (x.name != y.name || x.domain != y.domain || !same_expr(x.mechanism, y.mechanism)) {
      return false;
    }
  }
  return true;
}

// ------------------------------------------------------------- validation

const char* violation_kind_name(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::Normalization: return "normalization";
    case Violation::Kind::Cycle: return "cycle";
    case Violation::Kind::Domain: return "domain";
    case Violation::Kind::Operand: return "operand";
    case Violation::Kind::TableCoverage: return "table-coverage";
    case Violation::Kind::Size: return "size";
  }
  return "?";
}

namespace {

void check_table_coverage(const Expr& e, const Scm& scm, const std::string& var,
                          std::vector<Violation>& out) {
  if (e.kind == ExprKind::Table) {
    std::int64_t cells = 1;
    std::vector<const FiniteDomain*> doms;
    for (const auto& in : e.inputs) {
      const FiniteDomain* d = nullptr;
      if (auto i = scm.endo_index(in)) d = &scm.endogenous()[*i].domain;
      if (auto x = scm.exo_index(in)) d = &scm.exogenous()[*x].support;
      doms.push_back(d);
      cells *= d->size();
    }
    std::int64_t covered = 0;
    for (const auto& [key, v] : e.rows) {
      bool inside = true;
      for (std::size_t k = 0; k < key.size(); ++k) inside = inside && doms[k]->contains(key[k]);
      if (inside) ++covered;
    }
    if (covered < cells) {
      out.push_back({Violation::Kind::TableCoverage, var,
                     "table covers " + std::to_string(covered) + " of " + std::to_string(cells) +
                         " input combinations"});
    }
  }
  for (const auto& a : e.args) check_table_coverage(*a, scm, var, out);
}

std::vector<int> find_cycle(const Scm& scm) {
  const int n = scm.num_endogenous();
  std::vector<int> color(n, 0), stack;
  std::vector<int> cycle;
  std::function<bool(int)> dfs = [&](int v) {
    color[v] = 1;
    stack.push_back(v);
    for (int p : scm.endo_parents(v)) {
      if (color[p] == 1) {
        auto it = std::find(stack.begin(), stack.end(), p);
        cycle.assign(it, stack.end());
        return true;
      }
      if (color[p] == 0 && dfs(p)) return true;
    }
    stack.pop_back();
    color[v] = 2;
    return false;
  };
  for (int v = 0; v < n; ++v) {
    if (color[v] == 0 && dfs(v)) break;
  }
  // dfs walks parent links, so reverse to read in causal direction.
  std::reverse(cycle.begin(), cycle.end());
  return cycle;
}

}  // namespace

ValidationReport validate(const Scm& scm) {
  ValidationReport report;
  auto add = [&](Violation v) { report.violations.push_back(std::move(v)); };

  for (const auto& u : scm.exogenous()) {
    Rational total = 0;
    bool negative = false;
    for (const auto& p : u.pmf) {
      total += p;
      if (p < 0) negative = true;
    }
    if (negative) add({Violation::Kind::Normalization, u.name, "negative probability mass"});
    if (total != 1) {
      add({Violation::Kind::Normalization, u.name, "masses sum to " + to_string(total)});
    }
  }

  if (!scm.acyclic()) {
    auto cyc = find_cycle(scm);
    std::string text;
    for (int v : cyc) text += scm.endogenous()[v].name + " -> ";
    if (!cyc.empty()) text += scm.endogenous()[cyc.front()].name;
    add({Violation::Kind::Cycle, cyc.empty() ? "" : scm.endogenous()[cyc.front()].name,
         "cycle " + text});
  }

  const int n = scm.num_endogenous();
  const int m = scm.num_exogenous();
  for (int v = 0; v < n; ++v) {
    const auto& var = scm.endogenous()[v];
    std::size_t before = report.violations.size();
    check_table_coverage(*var.mechanism, scm, var.name, report.violations);
    if (report.violations.size() != before) continue;

    // Local closure: every parent value and exogenous support combination.
    std::vector<int> slots_idx;
    std::vector<const FiniteDomain*> doms;
    for (int p : scm.endo_parents(v)) {
      slots_idx.push_back(p);
      doms.push_back(&scm.endogenous()[p].domain);
    }
    for (int x : scm.exo_parents(v)) {
      slots_idx.push_back(n + x);
      doms.push_back(&scm.exogenous()[x].support);
    }
    double combos = 1;
    for (auto* d : doms) combos *= d->size();
    if (combos > 2e7) {
      add({Violation::Kind::Size, var.name, "too many input combinations to check exhaustively"});
      continue;
    }
    std::vector<int> slots(n + m, 0);
    std::vector<int> pos(doms.size(), 0);
    for (std::size_t k = 0; k < doms.size(); ++k) slots[slots_idx[k]] = (*doms[k])[0];
    while (true) {
      auto describe = [&] {
        std::ostringstream os;
        for (std::size_t k = 0; k < doms.size(); ++k) {
          int s = slots_idx[k];
          os << (k ? ", " : "")
             << (s < n ? scm.endogenous()[s].name : scm.exogenous()[s - n].name) << "=" << slots[s];
        }
        return os.str();
      };
      try {
        int out = scm.evaluate(v, slots);
        if (!var.domain.contains(out)) {
          add({Violation::Kind::Domain, var.name,
               "value " + std::to_string(out) + " outside domain at " + describe()});
          break;
        }
      } catch (const EvalError& e) {
        add({Violation::Kind::Operand, var.name, std::string(e.what()) + " at " + describe()});
        break;
      }
      std::size_t k = 0;
      for (; k < doms.size(); ++k) {
        if (++pos[k] < doms[k]->size()) {
          slots[slots_idx[k]] = (*doms[k])[pos[k]];
          break;
        }
        pos[k] = 0;
        slots[slots_idx[k]] = (*doms[k])[0];
      }
      if (k == doms.size()) break;
    }
  }
  report.ok = report.violations.empty();
  return report;
}

void require_valid(const Scm& scm) {
  auto r = validate(scm);
  if (r.ok) return;
  std::string msg = "model '" + scm.name() + "' is invalid:";
  for (const auto& v : r.violations) {
    msg += std::string(" [") + violation_kind_name(v.kind) + "] " + v.subject + ": " + v.detail + ";";
  }
  throw ModelError(msg);
}

// ------------------------------------------------------- derived objects

CausalDiagram induce_diagram(const Scm& scm) {
  CausalDiagram g(scm.endogenous_names());
  const int n = scm.num_endogenous();
  for (int v = 0; v < n; ++v) {
    for (int p : scm.endo_parents(v)) {
      if (p != v) g.add_directed(p, v);
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const auto& ea = scm.exo_parents(a);
      const auto& eb = scm.exo_parents(b);
      std::vector<int> common;
      std::set_intersection(ea.begin(), ea.end(), eb.begin(), eb.end(), std::back_inserter(common));
      if (!common.empty()) g.add_bidirected(a, b);
    }
  }
  return g;
}

Scm mutilate(const Scm& scm, const Intervention& x) {
  auto fixed = scm.resolve(x);
  auto endo = scm.endogenous();
  for (std::size_t i = 0; i < endo.size(); ++i) {
    if (fixed[i]) endo[i].mechanism = Expr::constant(*fixed[i]);
  }
  return Scm(scm.name(), scm.exogenous(), std::move(endo));
}

std::map<std::string, int> solve(const Scm& scm, const std::map<std::string, int>& u) {
  std::vector<int> values(scm.num_exogenous());
  for (int i = 0; i < scm.num_exogenous(); ++i) {
    const auto& f = scm.exogenous()[i];
    auto it = u.find(f.name);
    if (it == u.end()) throw ModelError("no value for exogenous factor '" + f.name + "'");
    if (!f.support.contains(it->second)) {
      throw ModelError("value outside the support of '" + f.name + "'");
    }
    values[i] = it->second;
  }
  auto v = solve(scm, values);
  std::map<std::string, int> out;
  for (int i = 0; i < scm.num_endogenous(); ++i) out[scm.endogenous()[i].name] = v[i];
  return out;
}

std::vector<int> solve(const Scm& scm, std::span<const int> u, const Intervention& x) {
  std::vector<int> slots(scm.num_endogenous() + scm.num_exogenous());
  scm.solve_into(u, scm.resolve(x), slots);
  slots.resize(scm.num_endogenous());
  return slots;
}

// ------------------------------------------------------------------ atoms

AtomCursor::AtomCursor(const Scm& scm) : scm_(&scm) {
  index_.assign(scm.num_exogenous(), 0);
  values_.resize(scm.num_exogenous());
  for (int i = 0; i < scm.num_exogenous(); ++i) values_[i] = scm.exogenous()[i].support[0];
}

void AtomCursor::next() {
  const auto& exo = scm_->exogenous();
  for (std::size_t k = exo.size(); k-- > 0;) {
    if (++index_[k] < exo[k].support.size()) {
      values_[k] = exo[k].support[index_[k]];
      return;
    }
    index_[k] = 0;
    values_[k] = exo[k].support[0];
  }
  done_ = true;
}

Rational AtomCursor::probability() const {
  Rational p = 1;
  const auto& exo = scm_->exogenous();
  for (std::size_t k = 0; k < exo.size(); ++k) p *= exo[k].pmf[index_[k]];
  return p;
}

bool AtomCursor::has_zero_mass() const {
  const auto& exo = scm_->exogenous();
  for (std::size_t k = 0; k < exo.size(); ++k) {
    if (exo[k].pmf[index_[k]] == 0) return true;
  }
  return false;
}

}  // namespace ctf
