#include "ctf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ctf/bounds.hpp"
#include "ctf/consistency.hpp"
#include "ctf/datasets.hpp"
#include "ctf/dsl.hpp"
#include "ctf/engine.hpp"

namespace ctf::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("failed reading '" + path + "'");
  return ss.str();
}

void write_text(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << data;
  if (!f) throw IoError("failed writing '" + path + "'");
}

struct ModelSource {
  std::string file;
  std::string builtin;

  void add(CLI::App* app, const std::string& file_flag = "-m,--model") {
    app->add_option(file_flag, file, "model file (.scm)");
    app->add_option("--builtin", builtin, "built-in model name");
  }

  Scm load() const {
    if (file.empty() == builtin.empty()) throw UsageError("give exactly one of --model FILE or --builtin NAME");
    if (!builtin.empty()) return load_builtin(builtin);
    return parse_model(read_text(file));
  }
};

/// A file path or, when no such file exists, a built-in name.
Scm load_model_ref(const std::string& ref) {
  if (!std::filesystem::exists(ref)) {
    for (const auto& b : builtin_models()) {
      if (b.name == ref) return load_builtin(ref);
    }
  }
  return parse_model(read_text(ref));
}

std::string rational_text(const Rational& r) { return to_string(r) + " (" + to_decimal_string(r) + ")"; }

Intervention parse_assignments(const std::string& text) {
  Intervention x;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("expected VAR=VALUE in '" + text + "'");
    auto name = item.substr(0, eq);
    name.erase(std::remove(name.begin(), name.end(), ' '), name.end());
    try {
      std::size_t used = 0;
      std::string value = item.substr(eq + 1);
      int v = std::stoi(value, &used);
      if (value.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(value);
      if (!x.emplace(name, v).second) throw UsageError("'" + name + "' assigned twice");
    } catch (const std::logic_error&) {
      throw UsageError("bad value in '" + item + "'");
    }
  }
  if (x.empty()) throw UsageError("empty intervention");
  return x;
}

CausalDiagram diagram_for(const Scm& m, const std::string& file) {
  if (file.empty()) return induce_diagram(m);
  return parse_diagram(read_text(file));
}

Distribution obs_for(const Scm& m, const CausalDiagram& g, const std::string& csv) {
  if (csv.empty()) return observational(m, g.nodes());
  std::ifstream f(csv);
  if (!f) throw IoError("cannot read '" + csv + "'");
  return empirical_distribution_csv(f, g.nodes());
}

Domains domains_for(const Scm& m, const CausalDiagram& g) {
  Domains all = domains_of(m);
  Domains d;
  for (const auto& n : g.nodes()) {
    auto it = all.find(n);
    if (it == all.end()) throw Error("diagram node '" + n + "' is not a model variable");
    d.emplace(n, it->second);
  }
  return d;
}

void check_care_set(const CtfQuery& q, const std::vector<std::string>& w) {
  if (w.empty()) return;
  auto in = [&](const std::string& v) { return std::find(w.begin(), w.end(), v) != w.end(); };
  for (const auto& e : q.events) {
    if (!in(e.var)) throw UsageError("event variable '" + e.var + "' is outside the care set");
  }
  for (const auto& [v, val] : q.conditioning) {
    if (!in(v)) throw UsageError("conditioning variable '" + v + "' is outside the care set");
  }
}

nlohmann::json diag_json(const Diagnostic& d) {
  return {{"line", d.span.line},
          {"column", d.span.column},
          {"message", d.message},
          {"expected", d.expected}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual queries, bounds and consistency checks for discrete SCMs", "ctf"};
  app.require_subcommand(1);
  int code = kExitOk;
  std::function<void()> action;

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "parse and validate a model file");
  std::string validate_file;
  bool validate_json = false;
  validate_cmd->add_option("file", validate_file, "model file")->required();
  validate_cmd->add_flag("--json", validate_json);
  validate_cmd->callback([&] {
    action = [&] {
      auto parsed = parse_model_checked(read_text(validate_file));
      if (validate_json) {
        nlohmann::json j{{"file", validate_file}, {"valid", parsed.model.has_value()}};
        j["diagnostics"] = nlohmann::json::array();
        for (const auto& d : parsed.diagnostics) j["diagnostics"].push_back(diag_json(d));
        if (parsed.model) {
          j["model"] = parsed.model->name();
          j["endogenous"] = parsed.model->num_endogenous();
          j["exogenous"] = parsed.model->num_exogenous();
        }
        out << j.dump(2) << '\n';
      } else if (parsed.model) {
        out << "ok: model " << parsed.model->name() << " (" << parsed.model->num_endogenous()
            << " endogenous, " << parsed.model->num_exogenous() << " exogenous)\n";
      } else {
        for (const auto& d : parsed.diagnostics) out << validate_file << ":" << d.format() << '\n';
      }
      code = parsed.model ? kExitOk : kExitData;
    };
  });

  // query
  auto* query_cmd = app.add_subcommand("query", "evaluate a counterfactual query exactly");
  ModelSource query_src;
  std::string query_text;
  bool query_json = false;
  query_src.add(query_cmd);
  query_cmd->add_option("-q,--query", query_text, "P(...)")->required();
  query_cmd->add_flag("--json", query_json);
  query_cmd->callback([&] {
    action = [&] {
      Scm m = query_src.load();
      CtfQuery q = parse_query(query_text);
      Rational v = conditional_ctf(m, q);
      if (query_json) {
        out << nlohmann::json{{"query", format_query(q)},
                              {"value", to_pq_string(v)},
                              {"decimal", to_decimal_string(v)}}
                   .dump(2)
            << '\n';
      } else {
        out << rational_text(v) << '\n';
      }
    };
  });

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "optimal bounds from the observational distribution");
  ModelSource bounds_src;
  std::string bounds_query, bounds_diagram, bounds_obs, bounds_method = "auto";
  std::vector<std::string> bounds_care;
  std::size_t bounds_oracle = 0;
  std::uint64_t bounds_seed = 1;
  bool bounds_witnesses = false;
  bool bounds_json = false;
  bounds_src.add(bounds_cmd);
  bounds_cmd->add_option("-q,--query", bounds_query, "P(...)")->required();
  bounds_cmd->add_option("-g,--diagram", bounds_diagram, "diagram file (default: induced)");
  bounds_cmd->add_option("--obs", bounds_obs, "label CSV (default: exact model distribution)");
  bounds_cmd->add_option("--method", bounds_method, "auto|analytic|lp")
      ->check(CLI::IsMember({"auto", "analytic", "lp"}));
  bounds_cmd->add_option("-w,--care-set", bounds_care, "care set W")->delimiter(',');
  bounds_cmd->add_option("--oracle", bounds_oracle, "also sample N feasible models");
  bounds_cmd->add_option("--seed", bounds_seed, "seed for heuristic starts and the oracle");
  bounds_cmd->add_flag("--witnesses", bounds_witnesses, "print endpoint witness models");
  bounds_cmd->add_flag("--json", bounds_json, "JSON output (always on)");
  bounds_cmd->callback([&] {
    action = [&] {
      Scm m = bounds_src.load();
      CtfQuery q = parse_query(bounds_query);
      check_care_set(q, bounds_care);
      CausalDiagram g = diagram_for(m, bounds_diagram);
      Domains d = domains_for(m, g);
      Distribution obs = obs_for(m, g, bounds_obs);
      BoundResult r;
      if (bounds_method == "analytic") {
        r = analytic_bounds(obs, g, d, q);
      } else {
        BoundOptions opts;
        opts.seed = bounds_seed;
        r = optimal_bounds(obs, g, d, q, opts);
        if (bounds_method == "lp" && !r.certified) {
          err << "warning: no certified LP bound; result is a heuristic inner bound\n";
        }
      }
      auto j = r.to_json(q);
      if (bounds_oracle > 0) {
        auto o = oracle_inner_bounds(obs, g, d, q, bounds_oracle, bounds_seed);
        j["oracle"] = {{"lower", to_pq_string(o.lower)}, {"upper", to_pq_string(o.upper)}, {"samples", o.samples}};
      }
      if (bounds_witnesses) {
        j["lower_witness"] = r.lower_witness ? nlohmann::json(format_model(*r.lower_witness)) : nlohmann::json(nullptr);
        j["upper_witness"] = r.upper_witness ? nlohmann::json(format_model(*r.upper_witness)) : nlohmann::json(nullptr);
      }
      out << j.dump(2) << '\n';
    };
  });

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "compare two models on L1 and on queries");
  std::string cmp1, cmp2;
  std::vector<std::string> cmp_queries;
  bool cmp_json = false;
  compare_cmd->add_option("--m1,-1", cmp1, "first model (file or builtin name)")->required();
  compare_cmd->add_option("--m2,-2", cmp2, "second model (file or builtin name)")->required();
  compare_cmd->add_option("-q,--query", cmp_queries, "P(...), repeatable");
  compare_cmd->add_flag("--json", cmp_json);
  compare_cmd->callback([&] {
    action = [&] {
      Scm a = load_model_ref(cmp1);
      Scm b = load_model_ref(cmp2);
      std::vector<CtfQuery> qs;
      for (const auto& t : cmp_queries) qs.push_back(parse_query(t));
      auto rep = compare_models(a, b, qs);
      if (cmp_json) {
        out << rep.to_json().dump(2) << '\n';
        return;
      }
      out << "observational: " << (rep.observational_equal ? "equal" : "different") << '\n';
      out << "diagram: " << (rep.diagram_equal ? "equal" : "different") << '\n';
      for (const auto& c : rep.queries) {
        out << format_query(c.query) << ": " << (c.first ? rational_text(*c.first) : "undefined") << " vs "
            << (c.second ? rational_text(*c.second) : "undefined") << (c.equal() ? "  equal" : "  different")
            << '\n';
      }
    };
  });

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw label rows from a built-in model");
  std::string sample_builtin, sample_out;
  std::size_t sample_n = 1;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--builtin", sample_builtin)->required();
  sample_cmd->add_option("-n", sample_n)->required()->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample_seed);
  sample_cmd->add_option("-o,--output", sample_out, "CSV path (default: stdout)");
  sample_cmd->add_flag("--json", "accepted for uniformity; the CSV is the output");
  sample_cmd->callback([&] {
    action = [&] {
      Scm m = load_builtin(sample_builtin);
      auto csv = labels_csv(sample_builtin, sample_labels(m, sample_n, sample_seed));
      if (sample_out.empty()) {
        out << csv;
      } else {
        write_text(sample_out, csv);
      }
    };
  });

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "render an image dataset from a digit model");
  std::string gen_builtin, gen_dir;
  std::size_t gen_n = 1;
  std::uint64_t gen_seed = 0;
  bool gen_json = false;
  gen_cmd->add_option("--builtin", gen_builtin)->required();
  gen_cmd->add_option("-n", gen_n)->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("-o,--output", gen_dir, "output directory")->required();
  gen_cmd->add_flag("--json", gen_json);
  gen_cmd->callback([&] {
    action = [&] {
      const auto& b = find_builtin(gen_builtin);
      if (!b.renders) throw UsageError("model '" + gen_builtin + "' has no image renderer");
      Scm m = load_builtin(gen_builtin);
      auto res = export_dataset(b, m, sample_labels(m, gen_n, gen_seed), gen_dir);
      if (gen_json) {
        out << nlohmann::json{{"manifest", res.manifest.string()}, {"images", res.images.size()}}.dump(2) << '\n';
      } else {
        out << "wrote " << res.images.size() << " images and " << res.manifest.string() << '\n';
      }
    };
  });

  // check
  auto* check_cmd = app.add_subcommand("check", "Ctf-consistency verdict for a proxy log");
  ModelSource check_src;
  std::string check_obs, check_log, check_diagram, check_eps = "1/50", check_delta = "1/100";
  std::vector<std::string> check_care;
  bool check_json = false;
  check_src.add(check_cmd);
  check_cmd->add_option("--obs", check_obs, "reference label CSV (default: exact model distribution)");
  check_cmd->add_option("--log", check_log, "proxy log (JSON lines)")->required();
  check_cmd->add_option("-g,--diagram", check_diagram);
  check_cmd->add_option("-w,--care-set", check_care)->delimiter(',');
  check_cmd->add_option("--eps", check_eps, "observational TV tolerance");
  check_cmd->add_option("--delta", check_delta, "bound slack");
  check_cmd->add_flag("--json", check_json);
  check_cmd->callback([&] {
    action = [&] {
      CheckOptions opts;
      try {
        opts.eps_obs = parse_rational(check_eps);
        opts.delta = parse_rational(check_delta);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      Scm m = check_src.load();
      CausalDiagram g = diagram_for(m, check_diagram);
      Domains d = domains_for(m, g);
      Distribution obs = obs_for(m, g, check_obs);
      std::ifstream f(check_log);
      if (!f) throw IoError("cannot read '" + check_log + "'");
      auto log = read_proxy_log(f);
      auto rep = check_ctf_consistency(obs, log, g, d, check_care, opts);
      if (check_json) {
        out << rep.to_json().dump(2) << '\n';
      } else {
        out << "verdict: " << verdict_name(rep.verdict) << '\n';
        out << "observational TV: " << rational_text(rep.tv) << (rep.obs_fit ? " <= " : " > ")
            << to_string(rep.eps_obs) << '\n';
        std::size_t bad = 0;
        for (const auto& c : rep.cells) bad += c.in_bound ? 0 : 1;
        out << "cells: " << rep.cells.size() << " checked, " << bad << " out of bound, " << rep.skipped.size()
            << " skipped\n";
        for (const auto& c : rep.cells) {
          if (c.in_bound) continue;
          out << "  w=" << nlohmann::json(c.w).dump() << " w'=" << nlohmann::json(c.w_prime).dump()
              << " empirical " << to_decimal_string(c.empirical) << " bound [" << to_string(c.lower) << ", "
              << to_string(c.upper) << "]\n";
        }
      }
      code = verdict_exit_code(rep.verdict);
    };
  });

  // models
  auto* models_cmd = app.add_subcommand("models", "list built-in models");
  bool models_json = false;
  models_cmd->add_flag("--json", models_json);
  models_cmd->callback([&] {
    action = [&] {
      if (models_json) {
        auto j = nlohmann::json::array();
        for (const auto& b : builtin_models()) {
          j.push_back({{"name", b.name}, {"description", b.description}, {"renders", b.renders}});
        }
        out << j.dump(2) << '\n';
        return;
      }
      for (const auto& b : builtin_models()) {
        out << b.name << (b.renders ? " [images]" : "") << "\n    " << b.description << '\n';
      }
    };
  });

  // proxy
  auto* proxy_cmd = app.add_subcommand("proxy", "simulate a label-level baseline editor");
  ModelSource proxy_src;
  std::string proxy_kind, proxy_do, proxy_out, proxy_diagram, proxy_obs;
  std::size_t proxy_n = 1;
  std::uint64_t proxy_seed = 0;
  bool proxy_json = false;
  proxy_src.add(proxy_cmd);
  proxy_cmd->add_option("--kind", proxy_kind, "conditional|preserve|markovian")
      ->required()
      ->check(CLI::IsMember({"conditional", "preserve", "markovian"}));
  proxy_cmd->add_option("--do", proxy_do, "intervention, e.g. Y=0")->required();
  proxy_cmd->add_option("-n", proxy_n)->required()->check(CLI::PositiveNumber);
  proxy_cmd->add_option("--seed", proxy_seed);
  proxy_cmd->add_option("-o,--output", proxy_out, "log path (default: stdout)");
  proxy_cmd->add_option("-g,--diagram", proxy_diagram, "diagram for the markovian fit");
  proxy_cmd->add_option("--obs", proxy_obs, "label CSV (default: exact model distribution)");
  proxy_cmd->add_flag("--json", proxy_json, "print the markovian fit report as JSON");
  proxy_cmd->callback([&] {
    action = [&] {
      Intervention x = parse_assignments(proxy_do);
      Scm m = proxy_src.load();
      CausalDiagram g = diagram_for(m, proxy_diagram);
      Distribution obs = obs_for(m, g, proxy_obs);
      ProxyLog log;
      std::optional<MarkovianFit> fit;
      if (proxy_kind == "conditional") {
        log = proxy_conditional(obs, x, proxy_n, proxy_seed);
      } else if (proxy_kind == "preserve") {
        log = proxy_preserve(obs, x, proxy_n, proxy_seed);
      } else {
        auto p = proxy_markovian(obs, g, domains_for(m, g), x, proxy_n, proxy_seed);
        log = std::move(p.log);
        fit = std::move(p.fit);
      }
      std::ostringstream ss;
      write_proxy_log(ss, log);
      std::ostream& report = proxy_out.empty() ? err : out;
      if (proxy_out.empty()) {
        out << ss.str();
      } else {
        write_text(proxy_out, ss.str());
      }
      if (fit) {
        if (proxy_json) {
          report << fit->to_json().dump(2) << '\n';
        } else {
          report << "markovian fit TV: " << rational_text(fit->tv) << ", filled contexts: " << fit->filled_contexts
                 << '\n';
        }
      }
    };
  });

  try {
    // CLI11 short names are single characters; accept -m1/-m2 as long forms.
    std::vector<std::string> reversed;
    for (auto it = args.rbegin(); it != args.rend(); ++it) {
      reversed.push_back(*it == "-m1" || *it == "-m2" ? "-" + *it : *it);
    }
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    if (action) action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return code;
}

}  // namespace ctf::cli
