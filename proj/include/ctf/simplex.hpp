#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ctf/rational.hpp"

namespace ctf {

enum class Sense { Le, Ge, Eq };

struct LpRow {
  std::vector<std::pair<int, Rational>> terms;  // (variable, coefficient)
  Sense sense = Sense::Eq;
  Rational rhs;
};

/// Variables are non-negative.
struct LinearProgram {
  int num_vars = 0;
  std::vector<LpRow> rows;
  std::vector<Rational> objective;  // dense, num_vars entries
  bool maximize = true;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };
const char* lp_status_name(LpStatus s);

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Rational value;
  std::vector<Rational> x;
};

/// Two-phase dense simplex in exact arithmetic. Dantzig pricing, Bland's rule once pivots stall.
LpResult simplex_solve(const LinearProgram& lp);

/// Any vertex of {x >= 0 : rows}, or nullopt when infeasible.
std::optional<std::vector<Rational>> feasible_vertex(const LinearProgram& lp);

/// True when the feasible region is exactly one point (`vertex` must be a
/// vertex of it).
bool is_single_point(const LinearProgram& lp, const std::vector<Rational>& vertex);

struct VertexEnumeration {
  std::vector<std::vector<Rational>> vertices;
  bool complete = false;  // false when the basis cap was hit
};

/// Breadth-first walk over feasible bases. Stops after `basis_cap` bases.
VertexEnumeration enumerate_vertices(const LinearProgram& lp, std::size_t basis_cap = 20000);

}  // namespace ctf
