#include "ctf/consistency.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "ctf/dsl.hpp"
#include "ctf/rng.hpp"

namespace ctf {

Distribution empirical_distribution(const std::vector<Assignment>& records,
                                    std::vector<std::string> vars) {
  if (records.empty()) throw Error("empirical distribution of an empty sample");
  if (vars.empty()) {
    for (const auto& [k, v] : records.front()) vars.push_back(k);
  }
  std::map<std::vector<int>, std::size_t> counts;
  std::vector<int> key(vars.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < vars.size(); ++k) {
      auto it = records[i].find(vars[k]);
      if (it == records[i].end()) {
        throw Error("ragged records: record " + std::to_string(i) + " lacks '" + vars[k] + "'");
      }
      key[k] = it->second;
    }
    ++counts[key];
  }
  Distribution out(vars);
  for (const auto& [k, c] : counts) {
    Rational f(static_cast<unsigned long>(c), static_cast<unsigned long>(records.size()));
    f.canonicalize();
    out.add(k, f);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

const std::set<std::string> kMetaColumns{"id", "model", "seed", "x_offset", "y_offset", "thickness",
                                         "image_path"};

}  // namespace

Distribution empirical_distribution_csv(std::istream& in, std::vector<std::string> vars) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV");
  auto header = split_csv(line);
  if (vars.empty()) {
    for (const auto& h : header) {
      if (!kMetaColumns.count(h)) vars.push_back(h);
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& v : vars) {
    auto it = std::find(header.begin(), header.end(), v);
    if (it == header.end()) throw Error("CSV has no column '" + v + "'");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<Assignment> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw Error("ragged CSV: line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                  " fields, header has " + std::to_string(header.size()));
    }
    Assignment a;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const std::string& f = fields[cols[k]];
      int value = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw Error("CSV line " + std::to_string(lineno) + ": '" + f + "' is not an integer");
      }
      a[vars[k]] = value;
    }
    records.push_back(std::move(a));
  }
  return empirical_distribution(records, vars);
}

// -------------------------------------------------------------- proxy log

nlohmann::json SampleRecord::to_json() const {
  nlohmann::json j;
  j["factual"] = factual;
  j["counterfactual"] = counterfactual;
  j["do"] = intervention;
  j["seed"] = seed;
  return j;
}

SampleRecord SampleRecord::from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.factual = j.at("factual").get<Assignment>();
  r.counterfactual = j.at("counterfactual").get<Assignment>();
  r.intervention = j.at("do").get<Intervention>();
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

void write_proxy_log(std::ostream& out, const ProxyLog& log) {
  for (const auto& r : log) out << r.to_json().dump() << '\n';
}

ProxyLog read_proxy_log(std::istream& in) {
  ProxyLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.push_back(SampleRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("proxy log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

// ---------------------------------------------------------------- checker

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Conditional: return "conditional";
  }
  return "?";
}

int verdict_exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    case Verdict::Conditional: return 2;
  }
  return 1;
}

nlohmann::json ConsistencyReport::to_json() const {
  nlohmann::json j;
  j["verdict"] = verdict_name(verdict);
  j["care_set"] = care_set;
  j["intervention"] = intervention;
  j["records"] = records;
  j["obs_fit"] = obs_fit;
  j["tv"] = to_pq_string(tv);
  j["tv_decimal"] = to_decimal_string(tv);
  j["eps_obs"] = to_pq_string(eps_obs);
  j["delta"] = to_pq_string(delta);
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"w", c.w},
                          {"w_prime", c.w_prime},
                          {"factual_count", c.factual_count},
                          {"joint_count", c.joint_count},
                          {"empirical", to_pq_string(c.empirical)},
                          {"empirical_decimal", to_decimal_string(c.empirical)},
                          {"lower", to_pq_string(c.lower)},
                          {"upper", to_pq_string(c.upper)},
                          {"certified", c.certified},
                          {"in_bound", c.in_bound}});
  }
  j["skipped"] = nlohmann::json::array();
  for (const auto& s : skipped) {
    j["skipped"].push_back({{"w", s.w}, {"w_prime", s.w_prime}, {"reason", s.reason}});
  }
  return j;
}

ConsistencyReport check_ctf_consistency(const Distribution& obs_ref, const ProxyLog& log,
                                        const CausalDiagram& g, const Domains& d,
                                        const std::vector<std::string>& care_set,
                                        const CheckOptions& opts) {
  if (log.empty()) throw Error("proxy log is empty");
  ConsistencyReport rep;
  rep.intervention = log.front().intervention;
  rep.records = log.size();
  rep.eps_obs = opts.eps_obs;
  rep.delta = opts.delta;
  rep.care_set = care_set.empty() ? g.nodes() : care_set;
  for (const auto& r : log) {
    if (r.intervention != rep.intervention) throw Error("proxy log mixes interventions");
  }
  for (const auto& [name, v] : rep.intervention) g.require_index(name);
  for (const auto& w : rep.care_set) g.require_index(w);

  // Condition (1).
  std::vector<Assignment> factual;
  factual.reserve(log.size());
  for (const auto& r : log) factual.push_back(r.factual);
  Distribution emp = empirical_distribution(factual, obs_ref.variables());
  rep.tv = tv_distance(emp, obs_ref);
  rep.obs_fit = rep.tv <= opts.eps_obs;

  // Condition (2).
  const auto& W = rep.care_set;
  auto project = [&](const Assignment& a) {
    std::vector<int> key;
    for (const auto& v : W) {
      auto it = a.find(v);
      if (it == a.end()) throw Error("proxy record lacks care-set variable '" + v + "'");
      key.push_back(it->second);
    }
    return key;
  };
  std::map<std::vector<int>, std::size_t> wcount;
  std::map<std::pair<std::vector<int>, std::vector<int>>, std::size_t> jcount;
  for (const auto& r : log) {
    auto a = project(r.factual);
    auto b = project(r.counterfactual);
    ++wcount[a];
    ++jcount[{a, b}];
  }
  std::vector<std::vector<int>> wprimes{{}};
  for (const auto& v : W) {
    std::vector<int> values;
    auto it = rep.intervention.find(v);
    if (it != rep.intervention.end()) {
      values = {it->second};
    } else {
      auto dom = d.find(v);
      if (dom == d.end()) throw Error("no domain for '" + v + "'");
      values = dom->second.values();
    }
    std::vector<std::vector<int>> next;
    for (const auto& prefix : wprimes) {
      for (int x : values) {
        auto p = prefix;
        p.push_back(x);
        next.push_back(std::move(p));
      }
    }
    wprimes = std::move(next);
  }
  auto to_assignment = [&](const std::vector<int>& key) {
    Assignment a;
    for (std::size_t k = 0; k < W.size(); ++k) a[W[k]] = key[k];
    return a;
  };
  BoundOptions bopts = opts.bounds;
  bopts.witnesses = false;
  Distribution wmarg = obs_ref.marginal(W);
  wmarg.prune();
  bool failed = false;
  bool uncertain = false;
  for (const auto& [wkey, mass] : wmarg.table()) {
    Assignment w = to_assignment(wkey);
    auto wc = wcount.find(wkey);
    if (wc == wcount.end()) {
      rep.skipped.push_back({w, {}, "no factual records"});
      continue;
    }
    for (const auto& wp : wprimes) {
      CellCheck cell;
      cell.w = w;
      cell.w_prime = to_assignment(wp);
      cell.factual_count = wc->second;
      auto jc = jcount.find({wkey, wp});
      cell.joint_count = jc == jcount.end() ? 0 : jc->second;
      cell.empirical = Rational(static_cast<unsigned long>(cell.joint_count),
                                static_cast<unsigned long>(cell.factual_count));
      cell.empirical.canonicalize();
      try {
        auto b = optimal_bounds(obs_ref, g, d, feature_query(W, rep.intervention, w, cell.w_prime), bopts);
        cell.lower = b.lower;
        cell.upper = b.upper;
        cell.certified = b.certified;
      } catch (const Error& e) {
        rep.skipped.push_back({w, cell.w_prime, e.what()});
        uncertain = true;
        continue;
      }
      cell.in_bound = cell.empirical >= cell.lower - opts.delta && cell.empirical <= cell.upper + opts.delta;
      if (!cell.in_bound) {
        if (cell.certified) {
          failed = true;
        } else {
          uncertain = true;
        }
      } else if (!cell.certified) {
        uncertain = true;
      }
      rep.cells.push_back(std::move(cell));
    }
  }
  if (!rep.obs_fit || failed) {
    rep.verdict = Verdict::Fail;
  } else if (uncertain) {
    rep.verdict = Verdict::Conditional;
  } else {
    rep.verdict = Verdict::Pass;
  }
  return rep;
}

// ---------------------------------------------------------------- proxies

namespace {

struct Sampler {
  std::vector<const std::vector<int>*> keys;
  std::vector<double> cdf;

  Sampler(const Distribution& obs, const Assignment& where) {
    std::vector<int> idx;
    for (const auto& [var, v] : where) idx.push_back(obs.index_of(var));
    std::vector<Rational> pmf;
    for (const auto& [key, m] : obs.table()) {
      if (sgn(m) == 0) continue;
      bool ok = true;
      std::size_t k = 0;
      for (const auto& [var, v] : where) ok = ok && key[idx[k++]] == v;
      if (!ok) continue;
      keys.push_back(&key);
      pmf.push_back(m);
    }
    if (keys.empty()) throw Error("conditioning cell has probability zero");
    Rational total = 0;
    for (const auto& m : pmf) total += m;
    for (auto& m : pmf) m /= total;
    cdf = cumulative(pmf);
  }

  Assignment draw(const Distribution& obs, Rng& rng) const {
    const auto& key = *keys[rng.categorical(cdf)];
    Assignment a;
    for (std::size_t k = 0; k < key.size(); ++k) a[obs.variables()[k]] = key[k];
    return a;
  }
};

void check_intervention(const Distribution& obs, const Intervention& x) {
  for (const auto& [var, v] : x) obs.index_of(var);
}

}  // namespace

ProxyLog proxy_conditional(const Distribution& obs, const Intervention& x, std::size_t n,
                           std::uint64_t seed) {
  check_intervention(obs, x);
  Sampler factual(obs, {});
  Sampler edited(obs, Assignment(x.begin(), x.end()));
  ProxyLog log;
  log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.seed = derive_seed(seed, i);
    Rng rng(r.seed);
    r.intervention = x;
    r.factual = factual.draw(obs, rng);
    r.counterfactual = edited.draw(obs, rng);
    log.push_back(std::move(r));
  }
  return log;
}

ProxyLog proxy_preserve(const Distribution& obs, const Intervention& x, std::size_t n,
                        std::uint64_t seed) {
  check_intervention(obs, x);
  Sampler factual(obs, {});
  ProxyLog log;
  log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.seed = derive_seed(seed, i);
    Rng rng(r.seed);
    r.intervention = x;
    r.factual = factual.draw(obs, rng);
    r.counterfactual = r.factual;
    for (const auto& [var, v] : x) r.counterfactual[var] = v;
    log.push_back(std::move(r));
  }
  return log;
}

nlohmann::json MarkovianFit::to_json() const {
  return {{"tv", to_pq_string(tv)},
          {"tv_decimal", to_decimal_string(tv)},
          {"filled_contexts", filled_contexts},
          {"model", model ? format_model(*model) : std::string()}};
}

MarkovianFit fit_markovian(const Distribution& obs, const CausalDiagram& g, const Domains& d) {
  MarkovianFit fit;
  std::set<std::string> taken(g.nodes().begin(), g.nodes().end());
  std::vector<ExogenousFactor> exo;
  std::vector<EndogenousVar> endo;
  for (int v = 0; v < g.size(); ++v) {
    const std::string& name = g.nodes()[v];
    auto dit = d.find(name);
    if (dit == d.end()) throw Error("no domain for '" + name + "'");
    const FiniteDomain& dom = dit->second;
    std::vector<std::string> pnames;
    std::vector<const FiniteDomain*> pdoms;
    for (int p : g.parents(v)) {
      pnames.push_back(g.nodes()[p]);
      pdoms.push_back(&d.at(g.nodes()[p]));
    }
    auto vars = pnames;
    vars.push_back(name);
    Distribution joint = obs.marginal(vars);
    // Conditional CDF for every parent context, last parent fastest.
    std::vector<std::vector<int>> contexts{{}};
    for (const auto* pd : pdoms) {
      std::vector<std::vector<int>> next;
      for (const auto& c : contexts) {
        for (int x : pd->values()) {
          auto e = c;
          e.push_back(x);
          next.push_back(std::move(e));
        }
      }
      contexts = std::move(next);
    }
    std::vector<std::vector<Rational>> cdfs;
    std::set<Rational> breaks{Rational(0), Rational(1)};
    for (const auto& c : contexts) {
      std::vector<Rational> mass(dom.size());
      Rational total = 0;
      for (int k = 0; k < dom.size(); ++k) {
        auto key = c;
        key.push_back(dom[k]);
        mass[k] = joint.prob(key);
        total += mass[k];
      }
      if (sgn(total) == 0) {
        ++fit.filled_contexts;
        for (auto& m : mass) m = Rational(1, dom.size());
      } else {
        for (auto& m : mass) m /= total;
      }
      std::vector<Rational> cum;
      Rational acc = 0;
      for (const auto& m : mass) {
        acc += m;
        cum.push_back(acc);
        if (acc > 0 && acc < 1) breaks.insert(acc);
      }
      cdfs.push_back(std::move(cum));
    }
    std::string uname = "U_" + name;
    while (taken.count(uname)) uname += "_";
    taken.insert(uname);
    std::vector<Rational> b(breaks.begin(), breaks.end());
    std::vector<Rational> pmf;
    std::vector<int> support;
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      pmf.push_back(b[j + 1] - b[j]);
      support.push_back(static_cast<int>(j));
    }
    std::map<std::vector<int>, int> rows;
    for (std::size_t ci = 0; ci < contexts.size(); ++ci) {
      for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        int k = 0;
        while (k + 1 < dom.size() && !(cdfs[ci][k] > b[j])) ++k;
        auto key = contexts[ci];
        key.push_back(static_cast<int>(j));
        rows[key] = dom[k];
      }
    }
    auto inputs = pnames;
    inputs.push_back(uname);
    exo.push_back({uname, FiniteDomain(support), pmf});
    endo.push_back({name, dom, Expr::table(std::move(inputs), std::move(rows))});
  }
  fit.model = std::make_shared<const Scm>("markovian", std::move(exo), std::move(endo));
  fit.tv = tv_distance(observational(*fit.model, obs.variables()), obs);
  return fit;
}

MarkovianProxy proxy_markovian(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                               const Intervention& x, std::size_t n, std::uint64_t seed) {
  MarkovianProxy out;
  out.fit = fit_markovian(obs, g, d);
  const Scm& m = *out.fit.model;
  std::vector<std::vector<double>> cdf;
  for (const auto& u : m.exogenous()) cdf.push_back(cumulative(u.pmf));
  auto factual = m.resolve({});
  auto edited = m.resolve(x);
  std::vector<int> u(m.num_exogenous());
  std::vector<int> slots(m.num_endogenous() + m.num_exogenous());
  auto names = m.endogenous_names();
  out.log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.seed = derive_seed(seed, i);
    Rng rng(r.seed);
    r.intervention = x;
    for (int k = 0; k < m.num_exogenous(); ++k) u[k] = m.exogenous()[k].support[rng.categorical(cdf[k])];
    m.solve_into(u, factual, slots);
    for (int k = 0; k < m.num_endogenous(); ++k) r.factual[names[k]] = slots[k];
    m.solve_into(u, edited, slots);
    for (int k = 0; k < m.num_endogenous(); ++k) r.counterfactual[names[k]] = slots[k];
    out.log.push_back(std::move(r));
  }
  return out;
}

}  // namespace ctf
