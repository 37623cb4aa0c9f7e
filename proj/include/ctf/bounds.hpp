#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctf/diagram.hpp"
#include "ctf/engine.hpp"
#include "ctf/model.hpp"
#include "ctf/query.hpp"
#include "ctf/simplex.hpp"

namespace ctf {

using Domains = std::map<std::string, FiniteDomain>;

Domains domains_of(const Scm& scm);

/// A c-factor needed by the constraints sits on a zero-probability context.
class UnidentifiedError : public Error {
 public:
  using Error::Error;
};

/// analytic_bounds was called on a query outside its closed-form pattern.
class PatternMismatch : public Error {
 public:
  using Error::Error;
};

/// Connected components of the bidirected part, as ascending node indices,
/// ordered by their smallest member.
std::vector<std::vector<int>> c_components(const CausalDiagram& g);

constexpr std::uint64_t kMaxResponseTypes = 1'000'000;

/// |X_V| ^ (number of parent configurations), saturating.
std::uint64_t response_type_count(const std::string& var, const CausalDiagram& g, const Domains& d);

/// Every response function of `var`: entry c of a type is its value on
/// parent configuration c (parents ascending by node index, last parent
/// varying fastest). Throws Error beyond kMaxResponseTypes.
std::vector<std::vector<int>> response_types(const std::string& var, const CausalDiagram& g,
                                             const Domains& d);

struct RelevantCells {
  /// Variables whose response functions the query reads.
  std::vector<std::string> needed;
  /// Retained parent configurations (values, parents ascending by node
  /// index) per needed variable.
  std::map<std::string, std::vector<std::vector<int>>> cells;
  /// Two events pin one variable to different values in the same world.
  bool conflicting = false;
};

RelevantCells project_relevant_cells(const CtfQuery& q, const CausalDiagram& g, const Domains& d);

struct ComponentConstraints {
  std::vector<std::string> members;
  bool projected = false;           // singleton restricted to retained cells
  std::vector<std::vector<int>> cells;  // retained configurations when projected
  std::uint64_t num_types = 0;
  LinearProgram rows;               // c-factor equalities, objective empty
};

/// Constraints for every c-component; singletons listed in `cells` are
/// projected onto their retained configurations.
std::vector<ComponentConstraints> build_constraints(const Distribution& obs, const CausalDiagram& g,
                                                    const Domains& d,
                                                    const RelevantCells* cells = nullptr);

struct BoundOptions {
  bool project = true;
  int heuristic_starts = 32;
  std::uint64_t seed = 1;
  std::size_t basis_cap = 20000;
  bool witnesses = true;
};

struct BoundResult {
  Rational lower;
  Rational upper;
  bool certified = false;
  std::string method;  // analytic, lp, bilinear, heuristic
  std::shared_ptr<const Scm> lower_witness;
  std::shared_ptr<const Scm> upper_witness;
  std::string note;

  nlohmann::json to_json(const CtfQuery& q) const;
};

BoundResult optimal_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                           const CtfQuery& q, const BoundOptions& opts = {});

/// Closed-form Frechet bounds for one counterfactually free singleton
/// variable whose parents are intervened or non-descendants of the
/// intervention. Requires factual conditioning on every variable.
BoundResult analytic_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                            const CtfQuery& q);

struct InnerBounds {
  Rational lower;
  Rational upper;
  std::size_t samples = 0;
};

/// Random feasible canonical models, each rebuilt as an Scm and evaluated
/// through the engine; returns the range of values seen.
InnerBounds oracle_inner_bounds(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                                const CtfQuery& q, std::size_t n, std::uint64_t seed);

}  // namespace ctf
