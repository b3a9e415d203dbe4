#pragma once

#include <string>
#include <vector>

#include "swarmloop/common.hpp"

namespace swarmloop::directory {

/// Path expression subset: `$`, `.field`, `.*`, `[n]`, `[*]`, and the
/// equality filter `[?(@.path==literal)]` with string, number, boolean, or
/// null literals. A filter applied to an array tests its elements; applied
/// to an object it tests the object itself.
class PathExpression {
public:
  /// Throws MalformedExpression.
  static PathExpression parse(const std::string& text);

  /// All nodes the expression selects in the document.
  std::vector<json> evaluate(const json& doc) const;

  /// True iff the expression selects at least one node.
  bool selects(const json& doc) const;

private:
  enum class StepKind { field, wildcard, index, filter };
  struct Step {
    StepKind kind = StepKind::field;
    std::string field;
    std::size_t index = 0;
    std::vector<std::string> filter_path;  // path after @
    json filter_value;
  };

  std::vector<Step> steps_;
};

}  // namespace swarmloop::directory
