#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctf/bounds.hpp"
#include "ctf/engine.hpp"

namespace ctf {

/// Relative frequencies over `vars` (every key of the first record when
/// empty). Throws Error on empty or ragged input.
Distribution empirical_distribution(const std::vector<Assignment>& records,
                                    std::vector<std::string> vars = {});

/// Label CSV with a header row. Columns id, model, seed, x_offset, y_offset,
/// thickness and image_path are ignored unless named in `vars`.
Distribution empirical_distribution_csv(std::istream& in, std::vector<std::string> vars = {});

struct SampleRecord {
  Assignment factual;
  Assignment counterfactual;
  Intervention intervention;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& j);
};

using ProxyLog = std::vector<SampleRecord>;

/// One JSON object per line.
void write_proxy_log(std::ostream& out, const ProxyLog& log);
ProxyLog read_proxy_log(std::istream& in);

enum class Verdict { Pass, Fail, Conditional };
const char* verdict_name(Verdict v);
/// 0 pass, 1 fail, 2 conditional.
int verdict_exit_code(Verdict v);

struct CellCheck {
  Assignment w;
  Assignment w_prime;
  std::size_t factual_count = 0;
  std::size_t joint_count = 0;
  Rational empirical;
  Rational lower;
  Rational upper;
  bool certified = false;
  bool in_bound = false;
};

struct SkippedCell {
  Assignment w;
  Assignment w_prime;  // empty when the whole factual cell was skipped
  std::string reason;
};

struct ConsistencyReport {
  std::vector<std::string> care_set;
  Intervention intervention;
  std::size_t records = 0;
  Rational tv;
  Rational eps_obs;
  Rational delta;
  bool obs_fit = false;
  std::vector<CellCheck> cells;
  std::vector<SkippedCell> skipped;
  Verdict verdict = Verdict::Fail;

  nlohmann::json to_json() const;
};

struct CheckOptions {
  Rational eps_obs{1, 50};
  Rational delta{1, 100};
  BoundOptions bounds;
};

/// Condition (1): TV between the log's factual marginal and obs_ref within
/// eps_obs. Condition (2): for each factual w over W in the support of
/// obs_ref and each w' agreeing with the intervention, the empirical
/// P(w' | w) lies in the optimal bound widened by delta. Cells whose w never
/// occurs in the log are skipped; uncertified or unavailable bounds make the
/// verdict conditional unless something already failed.
ConsistencyReport check_ctf_consistency(const Distribution& obs_ref, const ProxyLog& log,
                                        const CausalDiagram& g, const Domains& d,
                                        const std::vector<std::string>& care_set,
                                        const CheckOptions& opts = {});

/// Correlational editor: counterfactual = x' plus the remaining variables
/// drawn from obs conditioned on X = x'.
ProxyLog proxy_conditional(const Distribution& obs, const Intervention& x, std::size_t n,
                           std::uint64_t seed);

/// Copies the factual assignment and overwrites the intervened variables.
ProxyLog proxy_preserve(const Distribution& obs, const Intervention& x, std::size_t n,
                        std::uint64_t seed);

struct MarkovianFit {
  std::shared_ptr<const Scm> model;
  Rational tv;  // TV(P_model(V), obs)
  std::size_t filled_contexts = 0;  // zero-probability parent contexts set uniform

  nlohmann::json to_json() const;
};

/// Fits a Markovian model over the directed part of `g`, one inverse-CDF
/// exogenous factor per variable.
MarkovianFit fit_markovian(const Distribution& obs, const CausalDiagram& g, const Domains& d);

struct MarkovianProxy {
  ProxyLog log;
  MarkovianFit fit;
};

/// Twin-network samples from fit_markovian's model.
MarkovianProxy proxy_markovian(const Distribution& obs, const CausalDiagram& g, const Domains& d,
                               const Intervention& x, std::size_t n, std::uint64_t seed);

}  // namespace ctf
