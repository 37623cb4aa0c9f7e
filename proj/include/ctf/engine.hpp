#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctf/model.hpp"
#include "ctf/query.hpp"

namespace ctf {

using Assignment = std::map<std::string, int>;

/// Exact probability table over an ordered list of variables. Keys are value
/// vectors parallel to variables(); zero-mass keys may be absent.
class Distribution {
 public:
  Distribution() = default;
  explicit Distribution(std::vector<std::string> variables);

  const std::vector<std::string>& variables() const { return variables_; }
  const std::map<std::vector<int>, Rational>& table() const { return table_; }

  void add(const std::vector<int>& key, const Rational& mass);
  Rational prob(const std::vector<int>& key) const;
  /// Mass of every key agreeing with the partial assignment.
  Rational prob(const Assignment& partial) const;
  Rational total() const;
  /// Drops zero-mass keys.
  void prune();

  int index_of(const std::string& var) const;
  Distribution marginal(const std::vector<std::string>& vars) const;
  /// Same mass function with variables permuted into `order`.
  Distribution reorder(const std::vector<std::string>& order) const;

  /// {"variables": [...], "table": {"v1,v2,...": "p/q"}} with sorted keys.
  nlohmann::json to_json() const;
  static Distribution from_json(const nlohmann::json& j);

  friend bool operator==(const Distribution& a, const Distribution& b);

 private:
  std::vector<std::string> variables_;
  std::map<std::vector<int>, Rational> table_;
};

/// Total variation distance; both arguments must have the same variable set.
Rational tv_distance(const Distribution& a, const Distribution& b);

/// Joint of `vars` (all endogenous variables when empty).
Distribution observational(const Scm& scm, const std::vector<std::string>& vars = {});
Distribution interventional(const Scm& scm, const Intervention& x,
                            const std::vector<std::string>& vars = {});

/// Unnormalized joint: events and conditioning conjoined.
Rational counterfactual_joint(const Scm& scm, const CtfQuery& q);
/// Joint divided by the probability of the conditioning events.
Rational conditional_ctf(const Scm& scm, const CtfQuery& q);

/// Label-level feature counterfactual: events W[x']=w' with factual W=w as
/// conditioning.
CtfQuery feature_query(const std::vector<std::string>& care_set, const Intervention& x,
                       const Assignment& w, const Assignment& w_prime);
/// Unnormalized P(w, w'_{x'}), or P(w'_{x'} | w) when `conditional`.
Rational feature_ctf(const Scm& scm, const std::vector<std::string>& care_set,
                     const Intervention& x, const Assignment& w, const Assignment& w_prime,
                     bool conditional = false);

struct QueryComparison {
  CtfQuery query;
  std::optional<Rational> first;
  std::optional<Rational> second;
  std::string note;  // set when a value is undefined
  bool equal() const { return first == second; }
};

struct ComparisonReport {
  bool observational_equal = false;
  bool diagram_equal = false;
  std::vector<QueryComparison> queries;
  nlohmann::json to_json() const;
};

/// Throws ModelError when the endogenous signatures (names, domains) differ.
ComparisonReport compare_models(const Scm& m1, const Scm& m2, const std::vector<CtfQuery>& queries);

}  // namespace ctf
