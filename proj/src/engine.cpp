#include "ctf/engine.hpp"

#include <algorithm>
#include <set>

#include "ctf/dsl.hpp"

namespace ctf {

// ----------------------------------------------------------- distribution

Distribution::Distribution(std::vector<std::string> variables) : variables_(std::move(variables)) {
  std::set<std::string> uniq(variables_.begin(), variables_.end());
  if (uniq.size() != variables_.size()) throw Error("distribution lists a variable twice");
}

void Distribution::add(const std::vector<int>& key, const Rational& mass) {
  if (key.size() != variables_.size()) throw Error("distribution key has the wrong arity");
  table_[key] += mass;
}

Rational Distribution::prob(const std::vector<int>& key) const {
  auto it = table_.find(key);
  return it == table_.end() ? Rational(0) : it->second;
}

Rational Distribution::prob(const Assignment& partial) const {
  std::vector<std::pair<int, int>> checks;
  for (const auto& [name, v] : partial) checks.emplace_back(index_of(name), v);
  Rational total = 0;
  for (const auto& [key, m] : table_) {
    bool ok = true;
    for (const auto& [i, v] : checks) ok = ok && key[i] == v;
    if (ok) total += m;
  }
  return total;
}

Rational Distribution::total() const {
  Rational t = 0;
  for (const auto& [k, m] : table_) t += m;
  return t;
}

void Distribution::prune() {
  for (auto it = table_.begin(); it != table_.end();) {
    it = it->second == 0 ? table_.erase(it) : std::next(it);
  }
}

int Distribution::index_of(const std::string& var) const {
  auto it = std::find(variables_.begin(), variables_.end(), var);
  if (it == variables_.end()) throw Error("distribution has no variable '" + var + "'");
  return static_cast<int>(it - variables_.begin());
}

Distribution Distribution::marginal(const std::vector<std::string>& vars) const {
  std::vector<int> idx;
  for (const auto& v : vars) idx.push_back(index_of(v));
  Distribution out(vars);
  for (const auto& [key, m] : table_) {
    std::vector<int> k;
    for (int i : idx) k.push_back(key[i]);
    out.table_[k] += m;
  }
  return out;
}

Distribution Distribution::reorder(const std::vector<std::string>& order) const {
  if (order.size() != variables_.size()) throw Error("reorder needs the same variable set");
  return marginal(order);
}

nlohmann::json Distribution::to_json() const {
  nlohmann::json j;
  j["variables"] = variables_;
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [key, m] : table_) {
    std::string k;
    for (std::size_t i = 0; i < key.size(); ++i) k += (i ? "," : "") + std::to_string(key[i]);
    t[k] = to_pq_string(m);
  }
  j["table"] = t;
  return j;
}

Distribution Distribution::from_json(const nlohmann::json& j) {
  Distribution d(j.at("variables").get<std::vector<std::string>>());
  for (const auto& [k, v] : j.at("table").items()) {
    std::vector<int> key;
    std::size_t start = 0;
    while (start <= k.size()) {
      auto comma = k.find(',', start);
      if (comma == std::string::npos) comma = k.size();
      key.push_back(std::stoi(k.substr(start, comma - start)));
      start = comma + 1;
    }
    d.add(key, parse_rational(v.get<std::string>()));
  }
  return d;
}

bool operator==(const Distribution& a, const Distribution& b) {
  if (a.variables_ != b.variables_) return false;
  Distribution x = a, y = b;
  x.prune();
  y.prune();
  return x.table_ == y.table_;
}

Rational tv_distance(const Distribution& a, const Distribution& b) {
  Distribution bb = b.reorder(a.variables());
  std::set<std::vector<int>> keys;
  for (const auto& [k, m] : a.table()) keys.insert(k);
  for (const auto& [k, m] : bb.table()) keys.insert(k);
  Rational sum = 0;
  for (const auto& k : keys) sum += abs(a.prob(k) - bb.prob(k));
  return sum / 2;
}

// ------------------------------------------------------------ evaluation

namespace {

std::vector<int> indices_of(const Scm& scm, const std::vector<std::string>& vars) {
  std::vector<int> out;
  if (vars.empty()) {
    for (int i = 0; i < scm.num_endogenous(); ++i) out.push_back(i);
    return out;
  }
  std::set<std::string> seen;
  for (const auto& v : vars) {
    if (!seen.insert(v).second) throw QueryError("variable '" + v + "' requested twice");
    auto i = scm.endo_index(v);
    if (!i) throw QueryError("unknown variable '" + v + "'");
    out.push_back(*i);
  }
  return out;
}

template <class Fn>
void for_each_atom(const Scm& scm, Fn&& fn) {
  if (!scm.acyclic()) throw ModelError("model '" + scm.name() + "' is cyclic");
  for (AtomCursor c(scm); !c.done(); c.next()) {
    if (c.has_zero_mass()) continue;
    fn(c.values(), c.probability());
  }
}

/// Events grouped by intervention context, with the factual context first.
struct Plan {
  struct Group {
    Scm::Fixed fixed;
    std::vector<std::pair<int, int>> checks;  // (var, value)
  };
  std::vector<Group> groups;
};

Plan make_plan(const Scm& scm, const std::vector<CtfEvent>& events,
               const std::vector<std::pair<std::string, int>>& conditioning) {
  Plan plan;
  std::map<Intervention, int> where;
  auto group_for = [&](const Intervention& ctx) -> Plan::Group& {
    auto it = where.find(ctx);
    if (it == where.end()) {
      it = where.emplace(ctx, static_cast<int>(plan.groups.size())).first;
      plan.groups.push_back({scm.resolve(ctx), {}});
    }
    return plan.groups[it->second];
  };
  group_for({});
  for (const auto& e : events) group_for(e.context).checks.emplace_back(scm.require_endo(e.var), e.value);
  for (const auto& [n, v] : conditioning) group_for({}).checks.emplace_back(scm.require_endo(n), v);
  return plan;
}

Rational evaluate_plan(const Scm& scm, const Plan& plan) {
  Rational total = 0;
  std::vector<int> slots(scm.num_endogenous() + scm.num_exogenous());
  for_each_atom(scm, [&](const std::vector<int>& u, const Rational& p) {
    for (const auto& g : plan.groups) {
      if (g.checks.empty()) continue;
      scm.solve_into(u, g.fixed, slots);
      for (const auto& [var, value] : g.checks) {
        if (slots[var] != value) return;
      }
    }
    total += p;
  });
  return total;
}

}  // namespace

Distribution observational(const Scm& scm, const std::vector<std::string>& vars) {
  return interventional(scm, {}, vars);
}

Distribution interventional(const Scm& scm, const Intervention& x,
                            const std::vector<std::string>& vars) {
  auto idx = indices_of(scm, vars);
  std::vector<std::string> names;
  for (int i : idx) names.push_back(scm.endogenous()[i].name);
  Distribution out(names);
  auto fixed = scm.resolve(x);
  std::vector<int> slots(scm.num_endogenous() + scm.num_exogenous());
  std::map<std::vector<int>, Rational> acc;
  std::vector<int> key(idx.size());
  for_each_atom(scm, [&](const std::vector<int>& u, const Rational& p) {
    scm.solve_into(u, fixed, slots);
    for (std::size_t k = 0; k < idx.size(); ++k) key[k] = slots[idx[k]];
    acc[key] += p;
  });
  for (const auto& [k, m] : acc) out.add(k, m);
  return out;
}

Rational counterfactual_joint(const Scm& scm, const CtfQuery& q) {
  check_query(scm, q);
  return evaluate_plan(scm, make_plan(scm, q.events, q.conditioning));
}

Rational conditional_ctf(const Scm& scm, const CtfQuery& q) {
  check_query(scm, q);
  Rational joint = evaluate_plan(scm, make_plan(scm, q.events, q.conditioning));
  if (q.conditioning.empty()) return joint;
  Rational denom = evaluate_plan(scm, make_plan(scm, {}, q.conditioning));
  if (denom == 0) {
    throw QueryError("conditioning event has probability zero in " + format_query(q));
  }
  return joint / denom;
}

CtfQuery feature_query(const std::vector<std::string>& care_set, const Intervention& x,
                       const Assignment& w, const Assignment& w_prime) {
  CtfQuery q;
  for (const auto& v : care_set) {
    auto a = w.find(v);
    auto b = w_prime.find(v);
    if (a == w.end() || b == w_prime.end()) {
      throw QueryError("care-set variable '" + v + "' lacks a factual or counterfactual value");
    }
    q.events.push_back({v, b->second, x});
    q.conditioning.emplace_back(v, a->second);
  }
  return q;
}

Rational feature_ctf(const Scm& scm, const std::vector<std::string>& care_set,
                     const Intervention& x, const Assignment& w, const Assignment& w_prime,
                     bool conditional) {
  auto q = feature_query(care_set, x, w, w_prime);
  return conditional ? conditional_ctf(scm, q) : counterfactual_joint(scm, q);
}

// ------------------------------------------------------------- comparison

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json j;
  j["observational_equal"] = observational_equal;
  j["diagram_equal"] = diagram_equal;
  j["queries"] = nlohmann::json::array();
  for (const auto& q : queries) {
    nlohmann::json e;
    e["query"] = format_query(q.query);
    e["first"] = q.first ? nlohmann::json(to_pq_string(*q.first)) : nlohmann::json(nullptr);
    e["second"] = q.second ? nlohmann::json(to_pq_string(*q.second)) : nlohmann::json(nullptr);
    e["equal"] = q.equal();
    if (!q.note.empty()) e["note"] = q.note;
    j["queries"].push_back(e);
  }
  return j;
}

ComparisonReport compare_models(const Scm& m1, const Scm& m2, const std::vector<CtfQuery>& queries) {
  if (m1.num_endogenous() != m2.num_endogenous()) {
    throw ModelError("models have different endogenous variables");
  }
  for (const auto& v : m1.endogenous()) {
    auto j = m2.endo_index(v.name);
    if (!j || m2.endogenous()[*j].domain != v.domain) {
      throw ModelError("models disagree on variable '" + v.name + "'");
    }
  }
  ComparisonReport r;
  auto names = m1.endogenous_names();
  r.observational_equal = observational(m1, names) == observational(m2, names);
  auto g1 = induce_diagram(m1);
  auto g2 = induce_diagram(m2);
  // Compare edge sets by name so declaration order does not matter.
  auto edges = [](const CausalDiagram& g) {
    std::set<std::pair<std::string, std::string>> d, b;
    for (const auto& [x, y] : g.directed()) d.emplace(g.nodes()[x], g.nodes()[y]);
    for (const auto& [x, y] : g.bidirected()) {
      b.emplace(std::min(g.nodes()[x], g.nodes()[y]), std::max(g.nodes()[x], g.nodes()[y]));
    }
    return std::make_pair(d, b);
  };
  r.diagram_equal = edges(g1) == edges(g2);
  for (const auto& q : queries) {
    QueryComparison c{q, std::nullopt, std::nullopt, ""};
    try {
      c.first = conditional_ctf(m1, q);
    } catch (const QueryError& e) {
      c.note = std::string("first: ") + e.what();
    }
    try {
      c.second = conditional_ctf(m2, q);
    } catch (const QueryError& e) {
      c.note += (c.note.empty() ? "" : "; ") + std::string("second: ") + e.what();
    }
    r.queries.push_back(std::move(c));
  }
  return r;
}

}  // namespace ctf
