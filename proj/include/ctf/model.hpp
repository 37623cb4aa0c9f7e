#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctf/diagram.hpp"
#include "ctf/rational.hpp"

namespace ctf {

class ModelError : public Error {
 public:
  using Error::Error;
};

/// Ordered set of integer codes; always non-empty, ascending, duplicate-free.
class FiniteDomain {
 public:
  FiniteDomain() = default;
  explicit FiniteDomain(std::vector<int> values);
  static FiniteDomain range(int lo, int hi);

  const std::vector<int>& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  bool contains(int v) const;
  /// Position of `v`, or -1.
  int position(int v) const;
  int operator[](int i) const { return values_[i]; }

  friend bool operator==(const FiniteDomain&, const FiniteDomain&) = default;

 private:
  std::vector<int> values_;
};

struct ExogenousFactor {
  std::string name;
  FiniteDomain support;
  std::vector<Rational> pmf;  // parallel to support.values()

  friend bool operator==(const ExogenousFactor&, const ExogenousFactor&) = default;
};

enum class ExprKind { Const, Ref, Not, And, Or, Xor, Eq, Ge, Lt, Add, Sub, Mul, Table };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Mechanism expression. Tables map every combination of their inputs'
/// values to an output code; the other kinds are prefix operators.
struct Expr {
  ExprKind kind = ExprKind::Const;
  int value = 0;             // Const
  std::string name;          // Ref
  std::vector<ExprPtr> args; // operators
  std::vector<std::string> inputs;              // Table
  std::map<std::vector<int>, int> rows;         // Table

  static ExprPtr constant(int v);
  static ExprPtr ref(std::string name);
  static ExprPtr unary(ExprKind kind, ExprPtr a);
  static ExprPtr binary(ExprKind kind, ExprPtr a, ExprPtr b);
  static ExprPtr table(std::vector<std::string> inputs, std::map<std::vector<int>, int> rows);

  void collect_refs(std::set<std::string>& out) const;
};

bool operator==(const Expr& a, const Expr& b);
bool same_expr(const ExprPtr& a, const ExprPtr& b);
const char* kind_name(ExprKind kind);

struct EndogenousVar {
  std::string name;
  FiniteDomain domain;
  ExprPtr mechanism;
};

/// Map from endogenous variable name to the value it is forced to.
using Intervention = std::map<std::string, int>;

class EvalError : public Error {
 public:
  using Error::Error;
};

/// Finite SCM. Exogenous factors are kept sorted by name; endogenous
/// variables keep declaration order. The constructor resolves every name
/// (throwing ModelError on unknown or duplicate names) but does not demand
/// acyclicity or normalization; `validate` reports those.
class Scm {
 public:
  Scm(std::string name, std::vector<ExogenousFactor> exogenous,
      std::vector<EndogenousVar> endogenous);

  const std::string& name() const { return name_; }
  const std::vector<ExogenousFactor>& exogenous() const { return exogenous_; }
  const std::vector<EndogenousVar>& endogenous() const { return endogenous_; }
  int num_endogenous() const { return static_cast<int>(endogenous_.size()); }
  int num_exogenous() const { return static_cast<int>(exogenous_.size()); }

  std::optional<int> endo_index(const std::string& name) const;
  std::optional<int> exo_index(const std::string& name) const;
  int require_endo(const std::string& name) const;
  std::vector<std::string> endogenous_names() const;

  /// Endogenous variables referenced by the mechanism of `var`, ascending.
  const std::vector<int>& endo_parents(int var) const { return endo_refs_[var]; }
  /// Exogenous factors referenced by the mechanism of `var`, ascending.
  const std::vector<int>& exo_parents(int var) const { return exo_refs_[var]; }

  bool acyclic() const { return !topo_.empty() || endogenous_.empty(); }
  /// Empty when the dependency graph is cyclic.
  const std::vector<int>& topological_order() const { return topo_; }

  /// Number of exogenous atoms (product of support sizes); saturates at
  /// UINT64_MAX.
  std::uint64_t atom_count() const;

  /// Evaluates the mechanism of `var` against a slot vector laid out as
  /// [endogenous values..., exogenous values...].
  int evaluate(int var, std::span<const int> slots) const;

  /// Resolved intervention: one entry per endogenous variable.
  using Fixed = std::vector<std::optional<int>>;
  Fixed resolve(const Intervention& x) const;

  /// Solves every endogenous variable for the exogenous values `u`
  /// (support values, in exogenous order) under the forced values `fixed`.
  /// `slots` must have num_endogenous() + num_exogenous() entries.
  void solve_into(std::span<const int> u, const Fixed& fixed, std::span<int> slots) const;

  friend bool operator==(const Scm& a, const Scm& b);

 private:
  struct CompiledTable {
    std::vector<int> slots;
    std::vector<FiniteDomain> domains;  // copies, so a copied Scm stays valid
    std::vector<std::int64_t> strides;
    std::vector<int> outputs;  // kMissing when a row is absent
  };
  struct Node {
    ExprKind kind;
    int value = 0;
    int slot = -1;
    int a = -1, b = -1;
    int table = -1;
  };
  struct Compiled {
    std::vector<Node> nodes;
    std::vector<CompiledTable> tables;
    int root = -1;
  };

  int compile(const Expr& e, Compiled& out, int var);
  int eval_node(const Compiled& c, int node, std::span<const int> slots) const;
  const FiniteDomain* slot_domain(int slot) const;

  std::string name_;
  std::vector<ExogenousFactor> exogenous_;
  std::vector<EndogenousVar> endogenous_;
  std::vector<Compiled> compiled_;
  std::vector<std::vector<int>> endo_refs_;
  std::vector<std::vector<int>> exo_refs_;
  std::vector<int> topo_;
};

struct Violation {
  enum class Kind { Normalization, Cycle, Domain, Operand, TableCoverage, Size };
  Kind kind;
  std::string subject;  // offending variable or factor
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

const char* violation_kind_name(Violation::Kind kind);

/// Acyclicity, exact pmf normalization, and closure of every mechanism: each
/// mechanism is evaluated on every combination of its parents' domain values
/// and its exogenous supports (so closure also holds under any intervention).
ValidationReport validate(const Scm& scm);

/// Throws ModelError listing the violations when `validate` fails.
void require_valid(const Scm& scm);

/// Directed edge for each endogenous reference, bidirected edge for each
/// pair of mechanisms sharing an exogenous factor.
CausalDiagram induce_diagram(const Scm& scm);

/// Submodel with intervened mechanisms replaced by constants.
Scm mutilate(const Scm& scm, const Intervention& x);

/// Potential outcome for a full exogenous assignment (name -> value).
std::map<std::string, int> solve(const Scm& scm, const std::map<std::string, int>& u);

/// Endogenous values (declaration order) for exogenous values in exogenous order.
std::vector<int> solve(const Scm& scm, std::span<const int> u,
                       const Intervention& x = {});

/// Mixed-radix walk over the exogenous joint support.
class AtomCursor {
 public:
  explicit AtomCursor(const Scm& scm);
  bool done() const { return done_; }
  void next();
  /// Support values, in exogenous order.
  const std::vector<int>& values() const { return values_; }
  Rational probability() const;
  bool has_zero_mass() const;

 private:
  const Scm* scm_;
  std::vector<int> index_;
  std::vector<int> values_;
  bool done_ = false;
};

}  // namespace ctf
