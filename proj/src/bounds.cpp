#include "ctf/bounds.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include "ctf/dsl.hpp"
#include "ctf/rng.hpp"

namespace ctf {

Domains domains_of(const Scm& scm) {
  Domains d;
  for (const auto& v : scm.endogenous()) d.emplace(v.name, v.domain);
  return d;
}

std::vector<std::vector<int>> c_components(const CausalDiagram& g) {
  std::vector<int> parent(g.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& [a, b] : g.bidirected()) parent[find(a)] = find(b);
  std::map<int, std::vector<int>> groups;
  for (int v = 0; v < g.size(); ++v) groups[find(v)].push_back(v);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(members);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > UINT64_MAX / a) return UINT64_MAX;
  return a * b;
}

std::uint64_t sat_pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    r = sat_mul(r, base);
    if (r == UINT64_MAX) break;
  }
  return r;
}

// ------------------------------------------------------------ graph data

struct Net {
  const CausalDiagram* g = nullptr;
  int n = 0;
  std::vector<FiniteDomain> dom;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<std::int64_t>> stride;  // parallel to parents
  std::vector<std::int64_t> ncells;
  std::vector<int> topo;
  std::vector<int> topo_pos;

  Net(const CausalDiagram& graph, const Domains& d) : g(&graph), n(graph.size()) {
    for (const auto& name : graph.nodes()) {
      auto it = d.find(name);
      if (it == d.end()) throw Error("no domain given for diagram node '" + name + "'");
      dom.push_back(it->second);
    }
    topo = graph.topological_order();
    topo_pos.assign(n, 0);
    for (int i = 0; i < n; ++i) topo_pos[topo[i]] = i;
    parents.resize(n);
    stride.resize(n);
    ncells.assign(n, 1);
    for (int v = 0; v < n; ++v) {
      parents[v] = graph.parents(v);
      stride[v].assign(parents[v].size(), 1);
      std::int64_t s = 1;
      for (std::size_t k = parents[v].size(); k-- > 0;) {
        stride[v][k] = s;
        s *= dom[parents[v][k]].size();
        if (s > (std::int64_t{1} << 40)) throw Error("parent configuration space too large");
      }
      ncells[v] = s;
    }
  }

  int index(const std::string& name) const { return g->require_index(name); }

  std::int64_t cell(int v, const std::vector<int>& pos) const {
    std::int64_t c = 0;
    for (std::size_t k = 0; k < parents[v].size(); ++k) c += pos[parents[v][k]] * stride[v][k];
    return c;
  }

  /// Parent values (not positions) of configuration c.
  std::vector<int> cell_values(int v, std::int64_t c) const {
    std::vector<int> out;
    for (std::size_t k = 0; k < parents[v].size(); ++k) {
      out.push_back(dom[parents[v][k]][static_cast<int>((c / stride[v][k]) % dom[parents[v][k]].size())]);
    }
    return out;
  }

  int position(int v, int value) const {
    int p = dom[v].position(value);
    if (p < 0) {
      throw QueryError("value " + std::to_string(value) + " outside the domain of '" + g->nodes()[v] + "'");
    }
    return p;
  }
};

// ----------------------------------------------------------------- worlds

struct World {
  std::vector<std::optional<int>> fixed;  // positions
  std::vector<std::optional<int>> pin;    // positions
  std::vector<int> steps;                 // needed nodes in topological order
  std::vector<bool> response;             // needed and not intervened
};

std::vector<World> make_worlds(const Net& net, const CtfQuery& q, bool& conflicting) {
  conflicting = false;
  std::map<Intervention, std::vector<std::pair<int, int>>> pins;
  pins[{}];
  for (const auto& e : q.events) pins[e.context].emplace_back(net.index(e.var), e.value);
  for (const auto& [name, v] : q.conditioning) pins[{}].emplace_back(net.index(name), v);
  std::vector<World> worlds;
  for (const auto& [ctx, list] : pins) {
    if (list.empty()) continue;
    World w;
    w.fixed.assign(net.n, std::nullopt);
    w.pin.assign(net.n, std::nullopt);
    std::vector<bool> cut(net.n, false);
    for (const auto& [name, value] : ctx) {
      int v = net.index(name);
      w.fixed[v] = net.position(v, value);
      cut[v] = true;
    }
    std::vector<int> targets;
    for (const auto& [v, value] : list) {
      int p = net.position(v, value);
      if (w.pin[v] && *w.pin[v] != p) conflicting = true;
      w.pin[v] = p;
      targets.push_back(v);
    }
    auto needed = net.g->ancestors(targets, cut);
    w.response.assign(net.n, false);
    for (int v : net.topo) {
      if (!needed[v]) continue;
      w.steps.push_back(v);
      if (!w.fixed[v]) w.response[v] = true;
    }
    worlds.push_back(std::move(w));
  }
  return worlds;
}

/// Retained configurations of v: union over worlds reading v's response.
std::vector<std::int64_t> retained_cells(const Net& net, const std::vector<World>& worlds, int v) {
  std::set<std::int64_t> cells;
  for (const auto& w : worlds) {
    if (!w.response[v]) continue;
    std::vector<std::vector<int>> options;
    for (int p : net.parents[v]) {
      if (w.fixed[p]) {
        options.push_back({*w.fixed[p]});
      } else if (w.pin[p]) {
        options.push_back({*w.pin[p]});
      } else {
        std::vector<int> all(net.dom[p].size());
        std::iota(all.begin(), all.end(), 0);
        options.push_back(all);
      }
    }
    std::vector<std::size_t> idx(options.size(), 0);
    while (true) {
      std::int64_t c = 0;
      for (std::size_t k = 0; k < options.size(); ++k) c += options[k][idx[k]] * net.stride[v][k];
      cells.insert(c);
      std::size_t k = options.size();
      while (k > 0) {
        --k;
        if (++idx[k] < options[k].size()) break;
        idx[k] = 0;
        if (k == 0) {
          k = options.size() + 1;
          break;
        }
      }
      if (options.empty() || k == options.size() + 1) break;
    }
  }
  return {cells.begin(), cells.end()};
}

// --------------------------------------------------------------- c-factors

class CFactor {
 public:
  CFactor(const Net& net, const Distribution& obs) : net_(net) {
    std::vector<std::string> order;
    for (int v : net.topo) order.push_back(net.g->nodes()[v]);
    std::set<std::string> a(obs.variables().begin(), obs.variables().end());
    std::set<std::string> b(order.begin(), order.end());
    if (a != b) throw Error("observational distribution and diagram cover different variables");
    Distribution ordered = obs.reorder(order);
    prefix_.resize(net.n + 1);
    for (const auto& [key, m] : ordered.table()) {
      if (m < 0) throw Error("observational distribution has a negative mass");
      std::vector<int> pos(net.n);
      for (int i = 0; i < net.n; ++i) pos[i] = net.position(net.topo[i], key[i]);
      for (int i = 0; i <= net.n; ++i) {
        prefix_[i][std::vector<int>(pos.begin(), pos.begin() + i)] += m;
      }
    }
    if (prefix_[0][{}] != 1) throw Error("observational distribution does not sum to 1");
  }

  /// Probability of the first i variables in topological order, read from a
  /// node-indexed position vector.
  Rational prefix(int i, const std::vector<int>& pos) const {
    std::vector<int> key(i);
    for (int k = 0; k < i; ++k) key[k] = pos[net_.topo[k]];
    auto it = prefix_[i].find(key);
    return it == prefix_[i].end() ? Rational(0) : it->second;
  }

  /// Q_C at the assignment `pos` (positions for members and their outside
  /// parents; other entries ignored). Uses the first extension of the
  /// remaining predecessors on which every conditional is defined.
  std::optional<Rational> q(const std::vector<int>& members, std::vector<int> pos,
                            const std::vector<bool>& assigned) const {
    int last = 0;
    for (int m : members) last = std::max(last, net_.topo_pos[m]);
    std::vector<int> free;
    for (int i = 0; i < last; ++i) {
      int v = net_.topo[i];
      if (!assigned[v]) free.push_back(v);
    }
    for (int v : free) pos[v] = 0;
    while (true) {
      Rational value = 1;
      bool ok = true;
      for (int m : members) {
        int i = net_.topo_pos[m];
        Rational den = prefix(i, pos);
        if (sgn(den) == 0) {
          ok = false;
          break;
        }
        value *= prefix(i + 1, pos) / den;
      }
      if (ok) return value;
      std::size_t k = free.size();
      while (k > 0) {
        --k;
        if (++pos[free[k]] < net_.dom[free[k]].size()) break;
        pos[free[k]] = 0;
        if (k == 0) return std::nullopt;
      }
      if (free.empty()) return std::nullopt;
    }
  }

 private:
  const Net& net_;
  std::vector<std::map<std::vector<int>, Rational>> prefix_;
};

// ------------------------------------------------------------- components

struct Comp {
  std::vector<int> members;  // ascending node index
  bool projected = false;
  std::vector<std::int64_t> cells;          // retained full cell indices, projected only
  std::vector<int> slot_of;                 // full cell -> slot, projected only
  std::vector<std::uint64_t> radix;         // response types per member
  std::vector<std::uint64_t> mstride;       // member stride in the joint index
  std::vector<std::vector<std::uint64_t>> powers;  // per member, |X_V|^slot
  std::uint64_t ntypes = 1;
  std::vector<int> outside;                 // parents outside the component
  LinearProgram lp;

  int value_pos(const Net& net, int k, std::uint64_t t, std::int64_t cell) const {
    std::uint64_t tv = (t / mstride[k]) % radix[k];
    std::int64_t slot = cell;
    if (projected) {
      slot = slot_of[cell];
      if (slot < 0) throw Error("internal: evaluation reached a configuration outside the projection");
    }
    return static_cast<int>((tv / powers[k][slot]) % net.dom[members[k]].size());
  }
};

/// Builds the index space of `members`; `cells` non-null projects a singleton.
Comp make_comp(const Net& net, const std::vector<int>& members, const std::vector<std::int64_t>* cells) {
  Comp c;
  c.members = members;
  std::set<int> inside(members.begin(), members.end());
  std::set<int> out;
  for (int m : members) {
    for (int p : net.parents[m]) {
      if (!inside.count(p)) out.insert(p);
    }
  }
  c.outside.assign(out.begin(), out.end());
  if (cells) {
    c.projected = true;
    c.cells = *cells;
    c.slot_of.assign(net.ncells[members[0]], -1);
    for (std::size_t s = 0; s < cells->size(); ++s) c.slot_of[(*cells)[s]] = static_cast<int>(s);
  }
  std::uint64_t stride = 1;
  c.mstride.assign(members.size(), 1);
  c.radix.assign(members.size(), 1);
  c.powers.resize(members.size());
  for (std::size_t k = members.size(); k-- > 0;) {
    int v = members[k];
    std::uint64_t slots = c.projected ? c.cells.size() : static_cast<std::uint64_t>(net.ncells[v]);
    std::uint64_t dsz = net.dom[v].size();
    std::uint64_t count = sat_pow(dsz, slots);
    if (count > kMaxResponseTypes) {
      throw Error("response-type space of '" + net.g->nodes()[v] + "' exceeds " +
                  std::to_string(kMaxResponseTypes) + " types");
    }
    c.radix[k] = count;
    c.mstride[k] = stride;
    stride = sat_mul(stride, count);
    if (stride > kMaxResponseTypes) {
      throw Error("joint response-type space of a c-component exceeds " +
                  std::to_string(kMaxResponseTypes) + " types");
    }
    c.powers[k].resize(slots);
    std::uint64_t p = 1;
    for (std::uint64_t s = 0; s < slots; ++s) {
      c.powers[k][s] = p;
      p *= dsz;
    }
  }
  c.ntypes = stride;
  return c;
}

std::string comp_label(const Net& net, const Comp& c) {
  std::string out = "{";
  for (std::size_t i = 0; i < c.members.size(); ++i) out += (i ? "," : "") + net.g->nodes()[c.members[i]];
  return out + "}";
}

/// c-factor equality rows for a component.
void add_constraints(const Net& net, const CFactor& cf, Comp& c) {
  c.lp = LinearProgram{};
  c.lp.num_vars = static_cast<int>(c.ntypes);
  LpRow total;
  total.sense = Sense::Eq;
  total.rhs = 1;
  for (std::uint64_t t = 0; t < c.ntypes; ++t) total.terms.emplace_back(static_cast<int>(t), 1);
  if (c.projected) {
    int v = c.members[0];
    std::vector<bool> assigned(net.n, false);
    assigned[v] = true;
    for (int p : net.parents[v]) assigned[p] = true;
    for (std::size_t s = 0; s < c.cells.size(); ++s) {
      std::vector<int> pos(net.n, 0);
      for (std::size_t k = 0; k < net.parents[v].size(); ++k) {
        int p = net.parents[v][k];
        pos[p] = static_cast<int>((c.cells[s] / net.stride[v][k]) % net.dom[p].size());
      }
      for (int val = 0; val < net.dom[v].size(); ++val) {
        pos[v] = val;
        auto q = cf.q(c.members, pos, assigned);
        if (!q) {
          throw UnidentifiedError("unidentified c-factor: " + net.g->nodes()[v] +
                                  " has a zero-probability context needed by the query");
        }
        LpRow row;
        row.sense = Sense::Eq;
        row.rhs = *q;
        for (std::uint64_t t = 0; t < c.ntypes; ++t) {
          if (c.value_pos(net, 0, t, c.cells[s]) == val) row.terms.emplace_back(static_cast<int>(t), 1);
        }
        c.lp.rows.push_back(std::move(row));
      }
    }
    c.lp.rows.push_back(std::move(total));
    return;
  }
  // Full rows: for each outside-parent assignment every type yields one
  // member assignment.
  std::vector<int> order = c.members;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return net.topo_pos[a] < net.topo_pos[b]; });
  std::vector<int> member_k(net.n, -1);
  for (std::size_t k = 0; k < c.members.size(); ++k) member_k[c.members[k]] = static_cast<int>(k);
  std::uint64_t n_out = 1;
  for (int p : c.outside) n_out *= net.dom[p].size();
  std::uint64_t n_mem = 1;
  for (int m : c.members) n_mem *= net.dom[m].size();
  if (sat_mul(n_out, c.ntypes) > 50'000'000ULL) throw Error("c-factor constraint system too large");
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<int>> groups;
  std::vector<int> pos(net.n, 0);
  for (std::uint64_t o = 0; o < n_out; ++o) {
    std::uint64_t rem = o;
    for (std::size_t k = c.outside.size(); k-- > 0;) {
      int p = c.outside[k];
      pos[p] = static_cast<int>(rem % net.dom[p].size());
      rem /= net.dom[p].size();
    }
    for (std::uint64_t t = 0; t < c.ntypes; ++t) {
      for (int v : order) pos[v] = c.value_pos(net, member_k[v], t, net.cell(v, pos));
      std::uint64_t mi = 0;
      for (int m : c.members) mi = mi * net.dom[m].size() + pos[m];
      groups[{o, mi}].push_back(static_cast<int>(t));
    }
  }
  std::vector<bool> assigned(net.n, false);
  for (int m : c.members) assigned[m] = true;
  for (int p : c.outside) assigned[p] = true;
  for (std::uint64_t o = 0; o < n_out; ++o) {
    std::uint64_t rem = o;
    for (std::size_t k = c.outside.size(); k-- > 0;) {
      int p = c.outside[k];
      pos[p] = static_cast<int>(rem % net.dom[p].size());
      rem /= net.dom[p].size();
    }
    for (std::uint64_t mi = 0; mi < n_mem; ++mi) {
      std::uint64_t r = mi;
      for (std::size_t k = c.members.size(); k-- > 0;) {
        int m = c.members[k];
        pos[m] = static_cast<int>(r % net.dom[m].size());
        r /= net.dom[m].size();
      }
      auto q = cf.q(c.members, pos, assigned);
      if (!q) {
        throw UnidentifiedError("unidentified c-factor for component " + comp_label(net, c) +
                                ": zero-probability context");
      }
      LpRow row;
      row.sense = Sense::Eq;
      row.rhs = *q;
      auto it = groups.find({o, mi});
      if (it != groups.end()) {
        for (int t : it->second) row.terms.emplace_back(t, 1);
      }
      c.lp.rows.push_back(std::move(row));
    }
  }
  c.lp.rows.push_back(std::move(total));
}

using Dist = std::vector<Rational>;  // mass per type

// ----------------------------------------------------------------- problem

class Problem {
 public:
  Problem(const Distribution& obs, const CausalDiagram& g, const Domains& d, const CtfQuery& q,
          bool project)
      : net_(g, d), cf_(net_, obs), query_(q) {
    for (const auto& e : q.events) {
      net_.position(net_.index(e.var), e.value);
      for (const auto& [n, v] : e.context) net_.position(net_.index(n), v);
    }
    if (q.events.empty()) throw QueryError("query has no events");
    Assignment cond;
    for (const auto& [n, v] : q.conditioning) {
      net_.position(net_.index(n), v);
      cond[n] = v;
    }
    denominator_ = q.conditioning.empty() ? Rational(1) : obs.prob(cond);
    if (sgn(denominator_) == 0) {
      throw QueryError("conditioning event has probability zero under the observational distribution");
    }
    worlds_ = make_worlds(net_, q, conflicting_);
    auto comps = c_components(g);
    comp_of_.assign(net_.n, -1);
    member_k_.assign(net_.n, -1);
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      bool relevant = false;
      for (int m : comps[ci]) {
        comp_of_[m] = static_cast<int>(ci);
        for (const auto& w : worlds_) relevant = relevant || w.response[m];
      }
      members_.push_back(comps[ci]);
      relevant_.push_back(relevant);
    }
    comps_.resize(comps.size());
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      for (std::size_t k = 0; k < comps[ci].size(); ++k) member_k_[comps[ci][k]] = static_cast<int>(k);
      if (!relevant_[ci] || conflicting_) continue;
      if (project && comps[ci].size() == 1) {
        auto cells = retained_cells(net_, worlds_, comps[ci][0]);
        comps_[ci] = make_comp(net_, comps[ci], &cells);
      } else {
        comps_[ci] = make_comp(net_, comps[ci], nullptr);
      }
      add_constraints(net_, cf_, comps_[ci]);
    }
  }

  const Net& net() const { return net_; }
  bool conflicting() const { return conflicting_; }
  const Rational& denominator() const { return denominator_; }
  const std::vector<bool>& relevant() const { return relevant_; }
  std::vector<Comp>& comps() { return comps_; }
  const std::vector<World>& worlds() const { return worlds_; }

  bool holds(const std::vector<std::uint64_t>& types) const {
    std::vector<int> vals(net_.n, 0);
    for (const auto& w : worlds_) {
      for (int v : w.steps) {
        if (w.fixed[v]) {
          vals[v] = *w.fixed[v];
        } else {
          int ci = comp_of_[v];
          vals[v] = comps_[ci].value_pos(net_, member_k_[v], types[ci], net_.cell(v, vals));
        }
        if (w.pin[v] && vals[v] != *w.pin[v]) return false;
      }
    }
    return true;
  }

  /// Exact model realizing the given distributions over the relevant
  /// components' types. Other components get a fixed feasible realization.
  Scm witness(const std::map<int, Dist>& dists) {
    std::set<std::string> taken(net_.g->nodes().begin(), net_.g->nodes().end());
    auto fresh = [&](std::string base) {
      while (taken.count(base)) base += "_";
      taken.insert(base);
      return base;
    };
    std::vector<ExogenousFactor> exo;
    std::vector<EndogenousVar> endo(net_.n);
    for (std::size_t ci = 0; ci < members_.size(); ++ci) {
      const auto& members = members_[ci];
      const Comp* comp = nullptr;
      Dist dist;
      if (relevant_[ci] && !conflicting_) {
        comp = &comps_[ci];
        dist = dists.at(static_cast<int>(ci));
      } else if (members.size() > 1) {
        comp = &background(static_cast<int>(ci));
        dist = background_dist_[static_cast<int>(ci)];
      }
      std::vector<std::uint64_t> support;
      std::string rname;
      if (comp) {
        std::string label;
        for (int m : members) label += "_" + net_.g->nodes()[m];
        rname = fresh("R" + label);
        ExogenousFactor r{rname, FiniteDomain{}, {}};
        std::vector<int> idx;
        for (std::size_t t = 0; t < dist.size(); ++t) {
          if (sgn(dist[t]) > 0) {
            idx.push_back(static_cast<int>(support.size()));
            support.push_back(t);
            r.pmf.push_back(dist[t]);
          }
        }
        r.support = FiniteDomain(idx);
        exo.push_back(std::move(r));
      }
      for (int v : members) {
        int k = member_k_[v];
        // Configurations realized through a comonotone uniform factor.
        std::vector<std::int64_t> loose;
        for (std::int64_t c = 0; c < net_.ncells[v]; ++c) {
          if (!comp || (comp->projected && comp->slot_of[c] < 0)) loose.push_back(c);
        }
        std::string ename;
        std::vector<std::vector<int>> evalue;  // [interval][loose idx] -> position
        if (!loose.empty()) {
          ename = fresh("E_" + net_.g->nodes()[v]);
          auto [masses, table] = comonotone(v, loose);
          std::vector<int> idx(masses.size());
          std::iota(idx.begin(), idx.end(), 0);
          exo.push_back({ename, FiniteDomain(idx), masses});
          evalue = std::move(table);
        }
        std::vector<std::int64_t> loose_idx(net_.ncells[v], -1);
        for (std::size_t i = 0; i < loose.size(); ++i) loose_idx[loose[i]] = static_cast<std::int64_t>(i);
        std::vector<std::string> inputs;
        for (int p : net_.parents[v]) inputs.push_back(net_.g->nodes()[p]);
        if (comp) inputs.push_back(rname);
        if (!ename.empty()) inputs.push_back(ename);
        std::map<std::vector<int>, int> rows;
        std::size_t nr = comp ? support.size() : 1;
        std::size_t ne = ename.empty() ? 1 : evalue.size();
        for (std::int64_t c = 0; c < net_.ncells[v]; ++c) {
          std::vector<int> key = net_.cell_values(v, c);
          for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t e = 0; e < ne; ++e) {
              std::vector<int> full = key;
              if (comp) full.push_back(static_cast<int>(r));
              if (!ename.empty()) full.push_back(static_cast<int>(e));
              int pos = loose_idx[c] >= 0 ? evalue[e][loose_idx[c]]
                                          : comp->value_pos(net_, k, support[r], c);
              rows[full] = net_.dom[v][pos];
            }
          }
        }
        endo[v] = {net_.g->nodes()[v], net_.dom[v],
                   inputs.empty() ? Expr::constant(rows.begin()->second)
                                  : Expr::table(std::move(inputs), std::move(rows))};
      }
    }
    return Scm("witness", std::move(exo), std::move(endo));
  }

 private:
  /// Conditional of v at configuration c from the c-factor, or a point mass
  /// at the first value when unidentified.
  std::vector<Rational> conditional(int v, std::int64_t c) const {
    std::vector<bool> assigned(net_.n, false);
    assigned[v] = true;
    std::vector<int> pos(net_.n, 0);
    for (std::size_t k = 0; k < net_.parents[v].size(); ++k) {
      int p = net_.parents[v][k];
      assigned[p] = true;
      pos[p] = static_cast<int>((c / net_.stride[v][k]) % net_.dom[p].size());
    }
    std::vector<Rational> out(net_.dom[v].size());
    for (int val = 0; val < net_.dom[v].size(); ++val) {
      pos[v] = val;
      auto q = cf_.q({v}, pos, assigned);
      if (!q) {
        std::fill(out.begin(), out.end(), Rational(0));
        out[0] = 1;
        return out;
      }
      out[val] = *q;
    }
    return out;
  }

  /// Interval masses and, per interval, the value position at each config.
  std::pair<std::vector<Rational>, std::vector<std::vector<int>>> comonotone(
      int v, const std::vector<std::int64_t>& cells) const {
    std::vector<std::vector<Rational>> cdf;
    std::set<Rational> breaks{Rational(0), Rational(1)};
    for (auto c : cells) {
      auto p = conditional(v, c);
      std::vector<Rational> cum;
      Rational acc = 0;
      for (const auto& m : p) {
        acc += m;
        cum.push_back(acc);
        if (acc > 0 && acc < 1) breaks.insert(acc);
      }
      cdf.push_back(std::move(cum));
    }
    std::vector<Rational> b(breaks.begin(), breaks.end());
    std::vector<Rational> masses;
    std::vector<std::vector<int>> table;
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      masses.push_back(b[j + 1] - b[j]);
      std::vector<int> row;
      for (const auto& cum : cdf) {
        int k = 0;
        while (k + 1 < static_cast<int>(cum.size()) && !(cum[k] > b[j])) ++k;
        row.push_back(k);
      }
      table.push_back(std::move(row));
    }
    return {masses, table};
  }

  const Comp& background(int ci) {
    auto it = background_.find(ci);
    if (it != background_.end()) return it->second;
    Comp c = make_comp(net_, members_[ci], nullptr);
    add_constraints(net_, cf_, c);
    auto v = feasible_vertex(c.lp);
    if (!v) throw Error("observational distribution is incompatible with the diagram");
    background_dist_[ci] = *v;
    return background_.emplace(ci, std::move(c)).first->second;
  }

  Net net_;
  CFactor cf_;
  CtfQuery query_;
  Rational denominator_;
  bool conflicting_ = false;
  std::vector<World> worlds_;
  std::vector<std::vector<int>> members_;
  std::vector<bool> relevant_;
  std::vector<Comp> comps_;
  std::vector<int> comp_of_;
  std::vector<int> member_k_;
  std::map<int, Comp> background_;
  std::map<int, Dist> background_dist_;
};

// ------------------------------------------------------------- objective

/// Objective over the free components after summing out fixed ones.
struct Reduced {
  std::vector<int> free;                 // component ids
  std::vector<std::uint64_t> sizes;
  std::vector<Rational> tensor;          // mixed radix, last free fastest
  std::map<int, Dist> fixed;             // component id -> point

  std::uint64_t size() const { return tensor.size(); }

  Rational value(const std::map<int, Dist>& d) const {
    Rational total = 0;
    std::vector<std::uint64_t> idx(free.size(), 0);
    for (std::uint64_t i = 0; i < tensor.size(); ++i) {
      if (sgn(tensor[i]) != 0) {
        Rational w = tensor[i];
        std::uint64_t rem = i;
        for (std::size_t k = free.size(); k-- > 0;) {
          w *= d.at(free[k])[rem % sizes[k]];
          rem /= sizes[k];
          if (sgn(w) == 0) break;
        }
        total += w;
      }
    }
    return total;
  }

  /// Linear coefficients for free component `k` with the others held at `d`.
  std::vector<Rational> slice(std::size_t k, const std::map<int, Dist>& d) const {
    std::vector<Rational> c(sizes[k]);
    for (std::uint64_t i = 0; i < tensor.size(); ++i) {
      if (sgn(tensor[i]) == 0) continue;
      Rational w = tensor[i];
      std::uint64_t rem = i;
      std::uint64_t mine = 0;
      for (std::size_t j = free.size(); j-- > 0;) {
        std::uint64_t t = rem % sizes[j];
        rem /= sizes[j];
        if (j == k) {
          mine = t;
        } else {
          w *= d.at(free[j])[t];
        }
      }
      if (sgn(w) != 0) c[mine] += w;
    }
    return c;
  }
};

Reduced reduce(Problem& p) {
  Reduced r;
  auto& comps = p.comps();
  std::vector<int> relevant;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    if (!p.relevant()[ci]) continue;
    relevant.push_back(static_cast<int>(ci));
    auto v = feasible_vertex(comps[ci].lp);
    if (!v) {
      throw Error("observational distribution is incompatible with the diagram at component " +
                  comp_label(p.net(), comps[ci]));
    }
    if (is_single_point(comps[ci].lp, *v)) {
      r.fixed[static_cast<int>(ci)] = *v;
    } else {
      r.free.push_back(static_cast<int>(ci));
      r.sizes.push_back(comps[ci].ntypes);
    }
  }
  std::uint64_t total = 1;
  for (auto s : r.sizes) total = sat_mul(total, s);
  // Support of the fixed part as weighted type tuples.
  std::vector<std::pair<std::vector<std::uint64_t>, Rational>> fixed_combos{{{}, Rational(1)}};
  std::vector<int> fixed_ids;
  for (const auto& [ci, d] : r.fixed) {
    fixed_ids.push_back(ci);
    std::vector<std::pair<std::vector<std::uint64_t>, Rational>> next;
    for (const auto& [tuple, w] : fixed_combos) {
      for (std::size_t t = 0; t < d.size(); ++t) {
        if (sgn(d[t]) == 0) continue;
        auto tt = tuple;
        tt.push_back(t);
        next.emplace_back(std::move(tt), w * d[t]);
      }
    }
    fixed_combos = std::move(next);
  }
  if (total > 2'000'000 || sat_mul(total, fixed_combos.size()) > 40'000'000ULL) {
    throw Error("counterfactual objective too large to tabulate");
  }
  r.tensor.assign(total, Rational(0));
  std::vector<std::uint64_t> types(comps.size(), 0);
  for (std::uint64_t i = 0; i < total; ++i) {
    std::uint64_t rem = i;
    for (std::size_t k = r.free.size(); k-- > 0;) {
      types[r.free[k]] = rem % r.sizes[k];
      rem /= r.sizes[k];
    }
    for (const auto& [tuple, w] : fixed_combos) {
      for (std::size_t k = 0; k < fixed_ids.size(); ++k) types[fixed_ids[k]] = tuple[k];
      if (p.holds(types)) r.tensor[i] += w;
    }
  }
  return r;
}

struct Extremum {
  Rational value;
  std::map<int, Dist> at;
};

LpResult solve_linear(const Comp& c, const std::vector<Rational>& coeff, bool maximize) {
  LinearProgram lp = c.lp;
  lp.objective = coeff;
  lp.maximize = maximize;
  auto r = simplex_solve(lp);
  if (r.status != LpStatus::Optimal) throw Error("internal: bounded LP reported " + std::string(lp_status_name(r.status)));
  return r;
}

Dist random_vertex(const Comp& c, Rng& rng) {
  std::vector<Rational> coeff(c.ntypes);
  for (auto& x : coeff) x = rng.uniform_int(-1000, 1000);
  return solve_linear(c, coeff, true).x;
}

/// Rank-one test: tensor == outer product of its slices through a nonzero
/// entry, scaled.
bool factorizes(const Reduced& r, std::vector<std::vector<Rational>>& factors, Rational& scale) {
  std::uint64_t pivot = r.tensor.size();
  for (std::uint64_t i = 0; i < r.tensor.size(); ++i) {
    if (sgn(r.tensor[i]) != 0) {
      pivot = i;
      break;
    }
  }
  if (pivot == r.tensor.size()) return false;
  std::size_t k = r.free.size();
  std::vector<std::uint64_t> pidx(k), stride(k);
  std::uint64_t s = 1;
  for (std::size_t j = k; j-- > 0;) {
    stride[j] = s;
    pidx[j] = (pivot / s) % r.sizes[j];
    s *= r.sizes[j];
  }
  factors.assign(k, {});
  for (std::size_t j = 0; j < k; ++j) {
    factors[j].resize(r.sizes[j]);
    for (std::uint64_t t = 0; t < r.sizes[j]; ++t) {
      factors[j][t] = r.tensor[pivot + (t - pidx[j]) * stride[j]];
    }
  }
  const Rational& t0 = r.tensor[pivot];
  for (std::uint64_t i = 0; i < r.tensor.size(); ++i) {
    Rational prod = 1;
    std::uint64_t rem = i;
    for (std::size_t j = k; j-- > 0;) {
      prod *= factors[j][rem % r.sizes[j]];
      rem /= r.sizes[j];
    }
    Rational lhs = r.tensor[i];
    for (std::size_t j = 1; j < k; ++j) lhs *= t0;
    if (lhs != prod) return false;
  }
  scale = 1;
  for (std::size_t j = 1; j < k; ++j) scale *= t0;
  return true;
}

}  // namespace

// ------------------------------------------------------------ public API

std::uint64_t response_type_count(const std::string& var, const CausalDiagram& g, const Domains& d) {
  Net net(g, d);
  int v = net.index(var);
  return sat_pow(net.dom[v].size(), static_cast<std::uint64_t>(net.ncells[v]));
}

std::vector<std::vector<int>> response_types(const std::string& var, const CausalDiagram& g,
                                             const Domains& d) {
  Net net(g, d);
  int v = net.index(var);
  std::uint64_t count = sat_pow(net.dom[v].size(), static_cast<std::uint64_t>(net.ncells[v]));
  if (count > kMaxResponseTypes) {
    throw Error("'" + var + "' has " + (count == UINT64_MAX ? std::string("too many") : std::to_string(count)) +
                " response types; project onto relevant cells first");
  }
  std::vector<std::vector<int>> out;
  std::uint64_t dsz = net.dom[v].size();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::vector<int> table(net.ncells[v]);
    std::uint64_t rem = t;
    for (auto& x : table) {
      x = net.dom[v][static_cast<int>(rem % dsz)];
      rem /= dsz;
    }
    out.push_back(std::move(table));
  }
  return out;
}

RelevantCells project_relevant_cells(const CtfQuery& q, const CausalDiagram& g, const Domains& d) {
  Net net(g, d);
  RelevantCells out;
  auto worlds = make_worlds(net, q, out.conflicting);
  for (int v : net.topo) {
    bool needed = false;
    for (const auto& w : worlds) needed = needed || w.response[v];
    if (!needed) continue;
    const auto& name = g.nodes()[v];
    out.needed.push_back(name);
    for (auto c : retained_cells(net, worlds, v)) out.cells[name].push_back(net.cell_values(v, c));
  }
  return out;
}

std::vector<ComponentConstraints> build_constraints(const Distribution& obs, const CausalDiagram& g,
                                                    const Domains& d, const RelevantCells* cells) {
  Net net(g, d);
  CFactor cf(net, obs);
  std::vector<ComponentConstraints> out;
  for (const auto& members : c_components(g)) {
    ComponentConstraints cc;
    for (int m : members) cc.members.push_back(g.nodes()[m]);
    Comp comp;
    const std::string& first = g.nodes()[members[0]];
    if (cells && members.size() == 1 && cells->cells.count(first)) {
      std::vector<std::int64_t> idx;
      for (const auto& values : cells->cells.at(first)) {
        std::vector<int> pos(net.n, 0);
        for (std::size_t k = 0; k < values.size(); ++k) {
          int p = net.parents[members[0]][k];
          pos[p] = net.position(p, values[k]);
        }
        idx.push_back(net.cell(members[0], pos));
      }
      std::sort(idx.begin(), idx.end());
      comp = make_comp(net, members, &idx);
      cc.projected = true;
      cc.cells = cells->cells.at(first);
    } else {
      comp = make_comp(net, members, nullptr);
    }
    add_constraints(net, cf, comp);
    cc.num_types = comp.ntypes;
    cc.rows = std::move(comp.lp);
    out.push_back(std::move(cc));
  }
  return out;
}

nlohmann::json BoundResult::to_json(const CtfQuery& q) const {
  nlohmann::json j;
  j["query"] = format_query(q);
  j["method"] = method;
  j["lower"] = to_pq_string(lower);
  j["upper"] = to_pq_string(upper);
  j["lower_decimal"] = to_decimal_string(lower);
  j["upper_decimal"] = to_decimal_string(upper);
  j["certified"] = certified;
  j["witness_available"] = lower_witness != nullptr && upper_witness != nullptr;
  if (!note.empty()) j["note"] = note;
  return j;
}

BoundResult optimal_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                           const CtfQuery& q, const BoundOptions& opts) {
  Problem p(obs, g, d, q, opts.project);
  BoundResult out;
  if (p.conflicting()) {
    out.lower = out.upper = 0;
    out.certified = true;
    out.method = "lp";
    out.note = "events pin one variable to two values";
    return out;
  }
  Reduced r = reduce(p);
  auto& comps = p.comps();
  const Rational& den = p.denominator();
  auto finish = [&](const Extremum& lo, const Extremum& hi) {
    out.lower = lo.value / den;
    out.upper = hi.value / den;
    if (opts.witnesses && out.certified) {
      auto with_fixed = [&](std::map<int, Dist> m) {
        for (const auto& [ci, dd] : r.fixed) m[ci] = dd;
        return m;
      };
      try {
        out.lower_witness = std::make_shared<const Scm>(p.witness(with_fixed(lo.at)));
        out.upper_witness = std::make_shared<const Scm>(p.witness(with_fixed(hi.at)));
      } catch (const Error& e) {
        out.note = std::string("no witness: ") + e.what();
      }
    }
    return out;
  };

  if (r.free.empty()) {
    out.certified = true;
    out.method = "lp";
    Extremum e{r.tensor.empty() ? Rational(0) : r.tensor[0], {}};
    return finish(e, e);
  }
  if (r.free.size() == 1) {
    int ci = r.free[0];
    auto hi = solve_linear(comps[ci], r.tensor, true);
    auto lo = solve_linear(comps[ci], r.tensor, false);
    out.certified = true;
    out.method = "lp";
    return finish({lo.value, {{ci, lo.x}}}, {hi.value, {{ci, hi.x}}});
  }

  std::vector<std::vector<Rational>> factors;
  Rational scale;
  if (factorizes(r, factors, scale)) {
    Extremum lo{Rational(1), {}}, hi{Rational(1), {}};
    for (std::size_t k = 0; k < r.free.size(); ++k) {
      int ci = r.free[k];
      auto a = solve_linear(comps[ci], factors[k], true);
      auto b = solve_linear(comps[ci], factors[k], false);
      hi.value *= a.value;
      hi.at[ci] = a.x;
      lo.value *= b.value;
      lo.at[ci] = b.x;
    }
    hi.value /= scale;
    lo.value /= scale;
    out.certified = true;
    out.method = "lp";
    return finish(lo, hi);
  }

  if (r.free.size() == 2) {
    // Enumerate the smaller polytope first; fall back to the other.
    std::vector<std::size_t> order{0, 1};
    if (r.sizes[1] < r.sizes[0]) std::swap(order[0], order[1]);
    for (std::size_t a : order) {
      std::size_t b = 1 - a;
      auto vs = enumerate_vertices(comps[r.free[a]].lp, opts.basis_cap);
      if (!vs.complete) continue;
      std::optional<Extremum> lo, hi;
      for (const auto& v : vs.vertices) {
        std::map<int, Dist> at{{r.free[a], v}};
        auto coeff = r.slice(b, at);
        auto mx = solve_linear(comps[r.free[b]], coeff, true);
        auto mn = solve_linear(comps[r.free[b]], coeff, false);
        if (!hi || mx.value > hi->value) hi = Extremum{mx.value, {{r.free[a], v}, {r.free[b], mx.x}}};
        if (!lo || mn.value < lo->value) lo = Extremum{mn.value, {{r.free[a], v}, {r.free[b], mn.x}}};
      }
      out.certified = true;
      out.method = "bilinear";
      return finish(*lo, *hi);
    }
  }

  // Alternating maximization and minimization from random vertices.
  Rng rng(opts.seed);
  std::optional<Extremum> lo, hi;
  for (int s = 0; s < std::max(32, opts.heuristic_starts); ++s) {
    std::map<int, Dist> start;
    for (int ci : r.free) start[ci] = random_vertex(comps[ci], rng);
    for (bool maximize : {true, false}) {
      auto cur = start;
      Rational val = r.value(cur);
      for (int round = 0; round < 100; ++round) {
        bool improved = false;
        for (std::size_t k = 0; k < r.free.size(); ++k) {
          auto res = solve_linear(comps[r.free[k]], r.slice(k, cur), maximize);
          if (maximize ? res.value > val : res.value < val) {
            val = res.value;
            cur[r.free[k]] = res.x;
            improved = true;
          }
        }
        if (!improved) break;
      }
      if (maximize && (!hi || val > hi->value)) hi = Extremum{val, cur};
      if (!maximize && (!lo || val < lo->value)) lo = Extremum{val, cur};
    }
  }
  out.certified = false;
  out.method = "heuristic";
  out.note = "inner bound from alternating LPs; not certified";
  return finish(*lo, *hi);
}

BoundResult analytic_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                            const CtfQuery& q) {
  Net net(g, d);
  std::vector<std::optional<int>> w(net.n);
  for (const auto& [n, v] : q.conditioning) w[net.index(n)] = v;
  for (int v = 0; v < net.n; ++v) {
    if (!w[v]) throw PatternMismatch("analytic bounds need factual values for every variable; use optimal_bounds");
  }
  if (q.events.empty()) throw PatternMismatch("query has no events");
  const Intervention& x = q.events.front().context;
  if (x.empty()) throw PatternMismatch("analytic bounds need an intervention; use optimal_bounds");
  std::vector<int> xs;
  std::map<int, int> xv;
  for (const auto& [n, v] : x) {
    xs.push_back(net.index(n));
    xv[net.index(n)] = v;
  }
  auto desc = g.descendants(xs);
  BoundResult out;
  out.method = "analytic";
  out.certified = true;
  auto zero = [&](const std::string& why) {
    out.lower = out.upper = 0;
    out.note = why;
    return out;
  };
  int target = -1;
  int target_value = 0;
  for (const auto& e : q.events) {
    if (e.context != x) throw PatternMismatch("analytic bounds need one shared intervention; use optimal_bounds");
    int v = net.index(e.var);
    if (xv.count(v)) {
      if (e.value != xv[v]) return zero("intervened variable contradicts its intervention");
    } else if (!desc[v]) {
      if (e.value != *w[v]) return zero("non-descendant changes value");
    } else {
      if (target >= 0) throw PatternMismatch("more than one counterfactually free variable; use optimal_bounds");
      target = v;
      target_value = e.value;
    }
  }
  if (target < 0) throw PatternMismatch("no counterfactually free variable; the query is identified");
  for (const auto& [a, b] : g.bidirected()) {
    if (a == target || b == target) throw PatternMismatch("free variable is confounded; use optimal_bounds");
  }
  std::vector<int> cf_w(net.n);
  for (int v = 0; v < net.n; ++v) cf_w[v] = *w[v];
  for (int p : net.parents[target]) {
    if (xv.count(p)) {
      cf_w[p] = xv[p];
    } else if (desc[p]) {
      throw PatternMismatch("a parent of the free variable is itself affected; use optimal_bounds");
    }
  }
  // P(V = value | all predecessors) read straight from obs.
  auto conditional = [&](const std::vector<int>& vals, int value) -> Rational {
    Assignment pre;
    for (int i = 0; i < net.topo_pos[target]; ++i) {
      int u = net.topo[i];
      pre[g.nodes()[u]] = vals[u];
    }
    Rational den = obs.prob(pre);
    if (sgn(den) == 0) throw UnidentifiedError("unidentified c-factor: zero-probability parent context");
    pre[g.nodes()[target]] = value;
    return obs.prob(pre) / den;
  };
  bool same_cell = true;
  for (int p : net.parents[target]) same_cell = same_cell && cf_w[p] == *w[p];
  if (same_cell) {
    out.lower = out.upper = target_value == *w[target] ? 1 : 0;
    return out;
  }
  std::vector<int> factual(net.n);
  for (int v = 0; v < net.n; ++v) factual[v] = *w[v];
  Rational pf = conditional(factual, *w[target]);
  Rational pc = conditional(cf_w, target_value);
  out.lower = std::max(Rational(0), Rational(1 - (1 - pc) / pf));
  out.upper = std::min(Rational(1), Rational(pc / pf));
  return out;
}

InnerBounds oracle_inner_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                                const CtfQuery& q, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("oracle needs at least one sample");
  Problem p(obs, g, d, q, true);
  InnerBounds out;
  if (p.conflicting()) {
    out.lower = out.upper = 0;
    out.samples = n;
    return out;
  }
  Rng rng(seed);
  auto& comps = p.comps();
  // Vertex pools per relevant component.
  std::map<int, std::vector<Dist>> pools;
  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    if (!p.relevant()[ci]) continue;
    auto& pool = pools[static_cast<int>(ci)];
    bool complete = false;
    if (comps[ci].ntypes <= 64) {
      auto vs = enumerate_vertices(comps[ci].lp, 2000);
      pool = vs.vertices;
      complete = vs.complete;
    }
    if (!complete || pool.empty()) {
      for (int k = 0; k < 64; ++k) pool.push_back(random_vertex(comps[ci], rng));
    }
    if (pool.empty()) throw Error("observational distribution is incompatible with the diagram");
  }
  bool first = true;
  for (std::size_t s = 0; s < n; ++s) {
    std::map<int, Dist> dists;
    for (const auto& [ci, pool] : pools) {
      const Dist& a = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
      if (pool.size() == 1 || rng.uniform() < 0.5) {
        dists[ci] = a;
        continue;
      }
      const Dist& b = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
      Rational lam(rng.uniform_int(0, 64), 64);
      Dist mix(a.size());
      for (std::size_t t = 0; t < a.size(); ++t) mix[t] = lam * a[t] + (1 - lam) * b[t];
      dists[ci] = std::move(mix);
    }
    Scm model = p.witness(dists);
    Rational v = conditional_ctf(model, q);
    if (first || v < out.lower) out.lower = v;
    if (first || v > out.upper) out.upper = v;
    first = false;
  }
  out.samples = n;
  return out;
}

}  // namespace ctf
