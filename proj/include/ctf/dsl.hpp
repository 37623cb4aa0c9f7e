#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctf/diagram.hpp"
#include "ctf/model.hpp"
#include "ctf/query.hpp"

namespace ctf {

struct SourceSpan {
  int line = 1;     // 1-based
  int column = 1;   // 1-based, in bytes
  int offset = 0;   // byte offset
  int length = 0;
};

struct Diagnostic {
  SourceSpan span;
  std::string message;
  std::vector<std::string> expected;

  /// "line:col: message (expected ...)".
  std::string format() const;
};

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

struct ModelParse {
  std::optional<Scm> model;
  std::vector<Diagnostic> diagnostics;  // empty iff model is set
};

/// Parses and validates one model. `bern(...)` terms are desugared into
/// auxiliary uniform factors named U_<var> (suffixed when the name is taken).
ModelParse parse_model_checked(std::string_view text);

/// As parse_model_checked, throwing ParseError on any diagnostic.
Scm parse_model(std::string_view text);

/// Canonical text; parse_model(format_model(m)) == m.
std::string format_model(const Scm& scm);
std::string format_expr(const Expr& e);

/// `P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)`.
CtfQuery parse_query(std::string_view text);
std::string format_query(const CtfQuery& q);

/// `diagram NAME { nodes A, B, C; A -> B; A <-> C; }`. Without a nodes
/// statement, nodes appear in order of first mention.
CausalDiagram parse_diagram(std::string_view text);
std::string format_diagram(const CausalDiagram& g, const std::string& name = "g");

}  // namespace ctf
