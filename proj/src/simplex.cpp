#include "ctf/simplex.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace ctf {

const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

namespace {

/// Dense tableau over [structural | slack | artificial] columns; the last
/// entry of every row is the right-hand side.
struct Tableau {
  int n_struct = 0;
  int first_art = 0;
  int n = 0;
  std::vector<std::vector<Rational>> a;
  std::vector<int> basis;
  std::vector<bool> allowed;

  int m() const { return static_cast<int>(a.size()); }

  void pivot(int r, int c, std::vector<Rational>* cost) {
    std::vector<Rational>& pr = a[r];
    Rational inv = 1 / pr[c];
    std::vector<int> nz;
    for (int j = 0; j <= n; ++j) {
      if (sgn(pr[j]) != 0) {
        pr[j] *= inv;
        nz.push_back(j);
      }
    }
    auto eliminate = [&](std::vector<Rational>& row) {
      if (sgn(row[c]) == 0) return;
      Rational f = row[c];
      for (int j : nz) row[j] -= f * pr[j];
    };
    for (int i = 0; i < m(); ++i) {
      if (i != r) eliminate(a[i]);
    }
    if (cost) eliminate(*cost);
    basis[r] = c;
  }

  std::vector<Rational> point() const {
    std::vector<Rational> x(n_struct);
    for (int i = 0; i < m(); ++i) {
      if (basis[i] < n_struct) x[basis[i]] = a[i][n];
    }
    return x;
  }

  std::vector<Rational> reduced_costs(const std::vector<Rational>& c) const {
    std::vector<Rational> d(n + 1);
    for (int j = 0; j < n; ++j) d[j] = c[j];
    for (int i = 0; i < m(); ++i) {
      const Rational& cb = c[basis[i]];
      if (sgn(cb) == 0) continue;
      for (int j = 0; j <= n; ++j) {
        if (sgn(a[i][j]) != 0) d[j] -= cb * a[i][j];
      }
    }
    return d;
  }

  /// Leaving row for entering column j by the ratio test, Bland tie-break.
  int leaving_row(int j) const {
    int best = -1;
    Rational best_ratio;
    for (int i = 0; i < m(); ++i) {
      if (sgn(a[i][j]) <= 0) continue;
      Rational ratio = a[i][n] / a[i][j];
      if (best < 0 || ratio < best_ratio || (ratio == best_ratio && basis[i] < basis[best])) {
        best = i;
        best_ratio = ratio;
      }
    }
    return best;
  }

  /// Minimizes cost·x from the current feasible basis.
  LpStatus minimize(const std::vector<Rational>& cost, std::vector<Rational>& d) {
    d = reduced_costs(cost);
    // Dantzig pricing; Bland's rule after a run of degenerate pivots.
    int degenerate = 0;
    while (true) {
      bool bland = degenerate >= 50;
      int enter = -1;
      for (int j = 0; j < n; ++j) {
        if (!allowed[j] || sgn(d[j]) >= 0) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (enter < 0 || d[j] < d[enter]) enter = j;
      }
      if (enter < 0) return LpStatus::Optimal;
      int r = leaving_row(enter);
      if (r < 0) return LpStatus::Unbounded;
      degenerate = sgn(a[r][n]) == 0 ? degenerate + 1 : 0;
      pivot(r, enter, &d);
    }
  }
};

/// Builds the tableau and runs phase one. Returns false when infeasible.
bool phase_one(const LinearProgram& lp, Tableau& t) {
  const int nv = lp.num_vars;
  int n_slack = 0;
  for (const auto& row : lp.rows) {
    if (row.sense != Sense::Eq) ++n_slack;
  }
  std::vector<std::vector<Rational>> rows;
  std::vector<int> basic;
  int slack = nv;
  int width = nv + n_slack;
  for (const auto& row : lp.rows) {
    std::vector<Rational> r(width + 1);
    for (const auto& [j, v] : row.terms) {
      if (j < 0 || j >= nv) throw Error("LP term refers to an unknown variable");
      r[j] += v;
    }
    int s = -1;
    if (row.sense == Sense::Le) r[s = slack++] = 1;
    if (row.sense == Sense::Ge) r[s = slack++] = -1;
    r[width] = row.rhs;
    if (sgn(r[width]) < 0) {
      for (auto& v : r) v = -v;
    }
    basic.push_back(s >= 0 && r[s] == 1 ? s : -1);
    rows.push_back(std::move(r));
  }
  int n_art = static_cast<int>(std::count(basic.begin(), basic.end(), -1));
  t.n_struct = nv;
  t.first_art = width;
  t.n = width + n_art;
  t.a.clear();
  t.basis.clear();
  int art = width;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<Rational> r(t.n + 1);
    for (int j = 0; j < width; ++j) r[j] = rows[i][j];
    r[t.n] = rows[i][width];
    if (basic[i] < 0) {
      r[art] = 1;
      basic[i] = art++;
    }
    t.a.push_back(std::move(r));
    t.basis.push_back(basic[i]);
  }
  t.allowed.assign(t.n, true);
  if (n_art > 0) {
    std::vector<Rational> cost(t.n);
    for (int j = t.first_art; j < t.n; ++j) cost[j] = 1;
    std::vector<Rational> d;
    t.minimize(cost, d);
    if (sgn(d[t.n]) != 0) return false;  // -d[n] is the phase-one optimum
  }
  // Drive zero-level artificials out; drop rows that are redundant.
  std::vector<int> drop;
  for (int i = 0; i < t.m(); ++i) {
    if (t.basis[i] < t.first_art) continue;
    int col = -1;
    for (int j = 0; j < t.first_art; ++j) {
      if (sgn(t.a[i][j]) != 0) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      t.pivot(i, col, nullptr);
    } else {
      drop.push_back(i);
    }
  }
  for (auto it = drop.rbegin(); it != drop.rend(); ++it) {
    t.a.erase(t.a.begin() + *it);
    t.basis.erase(t.basis.begin() + *it);
  }
  for (int j = t.first_art; j < t.n; ++j) t.allowed[j] = false;
  return true;
}

std::vector<Rational> structural_cost(const LinearProgram& lp, const Tableau& t) {
  std::vector<Rational> cost(t.n);
  for (int j = 0; j < lp.num_vars && j < static_cast<int>(lp.objective.size()); ++j) {
    cost[j] = lp.maximize ? Rational(-lp.objective[j]) : lp.objective[j];
  }
  return cost;
}

}  // namespace

LpResult simplex_solve(const LinearProgram& lp) {
  LpResult out;
  Tableau t;
  if (!phase_one(lp, t)) {
    out.status = LpStatus::Infeasible;
    return out;
  }
  std::vector<Rational> d;
  out.status = t.minimize(structural_cost(lp, t), d);
  if (out.status != LpStatus::Optimal) return out;
  out.x = t.point();
  out.value = 0;
  for (int j = 0; j < lp.num_vars && j < static_cast<int>(lp.objective.size()); ++j) {
    if (sgn(out.x[j]) != 0) out.value += lp.objective[j] * out.x[j];
  }
  return out;
}

std::optional<std::vector<Rational>> feasible_vertex(const LinearProgram& lp) {
  Tableau t;
  if (!phase_one(lp, t)) return std::nullopt;
  return t.point();
}

bool is_single_point(const LinearProgram& lp, const std::vector<Rational>& vertex) {
  LinearProgram probe = lp;
  probe.maximize = true;
  probe.objective.assign(lp.num_vars, 0);
  bool any = false;
  for (int j = 0; j < lp.num_vars; ++j) {
    if (sgn(vertex[j]) == 0) {
      probe.objective[j] = 1;
      any = true;
    }
  }
  if (!any) return true;
  auto r = simplex_solve(probe);
  return r.status == LpStatus::Optimal && sgn(r.value) == 0;
}

VertexEnumeration enumerate_vertices(const LinearProgram& lp, std::size_t basis_cap) {
  VertexEnumeration out;
  Tableau start;
  if (!phase_one(lp, start)) {
    out.complete = true;
    return out;
  }
  auto key_of = [](std::vector<int> b) {
    std::sort(b.begin(), b.end());
    return b;
  };
  std::set<std::vector<int>> visited{key_of(start.basis)};
  std::set<std::vector<Rational>> seen;
  std::deque<Tableau> queue{std::move(start)};
  while (!queue.empty()) {
    Tableau t = std::move(queue.front());
    queue.pop_front();
    auto x = t.point();
    if (seen.insert(x).second) out.vertices.push_back(std::move(x));
    std::vector<bool> is_basic(t.n, false);
    for (int b : t.basis) is_basic[b] = true;
    for (int j = 0; j < t.n; ++j) {
      if (!t.allowed[j] || is_basic[j]) continue;
      Rational best;
      std::vector<int> rows;
      for (int i = 0; i < t.m(); ++i) {
        if (sgn(t.a[i][j]) <= 0) continue;
        Rational ratio = t.a[i][t.n] / t.a[i][j];
        if (rows.empty() || ratio < best) {
          best = ratio;
          rows = {i};
        } else if (ratio == best) {
          rows.push_back(i);
        }
      }
      for (int r : rows) {
        auto nb = t.basis;
        nb[r] = j;
        auto key = key_of(nb);
        if (visited.count(key)) continue;
        if (visited.size() >= basis_cap) return out;
        visited.insert(key);
        Tableau next = t;
        next.pivot(r, j, nullptr);
        queue.push_back(std::move(next));
      }
    }
  }
  out.complete = true;
  return out;
}

}  // namespace ctf
