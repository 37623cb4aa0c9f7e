#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ctf/model.hpp"

namespace ctf {

class QueryError : public Error {
 public:
  using Error::Error;
};

/// One term Y_x = y of a joint counterfactual event. An empty context is a
/// factual event.
struct CtfEvent {
  std::string var;
  int value = 0;
  Intervention context;

  friend bool operator==(const CtfEvent&, const CtfEvent&) = default;
};

struct CtfQuery {
  std::vector<CtfEvent> events;
  std::vector<std::pair<std::string, int>> conditioning;

  friend bool operator==(const CtfQuery&, const CtfQuery&) = default;
};

/// Checks names and values against `scm`. Throws QueryError.
void check_query(const Scm& scm, const CtfQuery& q);

}  // namespace ctf
