#include "swarmloop/directory/jsonpath.hpp"

#include <cctype>

namespace swarmloop::directory {

namespace {

[[noreturn]] void malformed(const std::string& text, const std::string& reason) {
  throw DomainError("MalformedExpression", reason + " in path expression: " + text,
                    json{{"expression", text}, {"reason", reason}});
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string read_ident(const std::string& s, std::size_t& i) {
  std::size_t start = i;
  while (i < s.size() && ident_char(s[i])) ++i;
  return s.substr(start, i - start);
}

void skip_spaces(const std::string& s, std::size_t& i) {
  while (i < s.size() && s[i] == ' ') ++i;
}

json read_literal(const std::string& text, std::size_t& i) {
  if (i >= text.size()) malformed(text, "missing literal");
  if (text[i] == '\'') {
    ++i;
    std::string value;
    while (i < text.size() && text[i] != '\'') {
      if (text[i] == '\\' && i + 1 < text.size()) ++i;
      value += text[i++];
    }
    if (i >= text.size()) malformed(text, "unterminated string literal");
    ++i;
    return json(value);
  }
  if (text.compare(i, 4, "true") == 0) {
    i += 4;
    return json(true);
  }
  if (text.compare(i, 5, "false") == 0) {
    i += 5;
    return json(false);
  }
  if (text.compare(i, 4, "null") == 0) {
    i += 4;
    return json(nullptr);
  }
  std::size_t start = i;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) ++i;
  bool digits = false, dot = false;
  while (i < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[i])) || (!dot && text[i] == '.'))) {
    if (text[i] == '.') dot = true;
    else digits = true;
    ++i;
  }
  if (!digits) malformed(text, "invalid literal");
  const std::string num = text.substr(start, i - start);
  try {
    if (dot) return json(std::stod(num));
    return json(std::stoll(num));
  } catch (const std::exception&) {
    malformed(text, "number literal out of range");
  }
}

}  // namespace

PathExpression PathExpression::parse(const std::string& text) {
  PathExpression expr;
  std::size_t i = 0;
  if (text.empty() || text[0] != '$') malformed(text, "expression must start with $");
  i = 1;
  while (i < text.size()) {
    if (text[i] == '.') {
      ++i;
      if (i < text.size() && text[i] == '*') {
        ++i;
        expr.steps_.push_back({StepKind::wildcard, "", 0, {}, {}});
        continue;
      }
      const auto name = read_ident(text, i);
      if (name.empty()) malformed(text, "empty field name");
      expr.steps_.push_back({StepKind::field, name, 0, {}, {}});
    } else if (text[i] == '[') {
      ++i;
      if (i >= text.size()) malformed(text, "unterminated bracket");
      if (text[i] == '*') {
        ++i;
        if (i >= text.size() || text[i] != ']') malformed(text, "expected ]");
        ++i;
        expr.steps_.push_back({StepKind::wildcard, "", 0, {}, {}});
      } else if (text[i] == '?') {
        ++i;
        if (i >= text.size() || text[i] != '(') malformed(text, "expected ( after ?");
        ++i;
        skip_spaces(text, i);
        if (i >= text.size() || text[i] != '@') malformed(text, "filter must start with @");
        ++i;
        Step step;
        step.kind = StepKind::filter;
        while (i < text.size() && text[i] == '.') {
          ++i;
          const auto name = read_ident(text, i);
          if (name.empty()) malformed(text, "empty field name in filter");
          step.filter_path.push_back(name);
        }
        if (step.filter_path.empty()) malformed(text, "filter path must name a field");
        skip_spaces(text, i);
        if (text.compare(i, 2, "==") != 0) malformed(text, "filter supports == only");
        i += 2;
        skip_spaces(text, i);
        step.filter_value = read_literal(text, i);
        skip_spaces(text, i);
        if (i >= text.size() || text[i] != ')') malformed(text, "expected )");
        ++i;
        if (i >= text.size() || text[i] != ']') malformed(text, "expected ]");
        ++i;
        expr.steps_.push_back(std::move(step));
      } else if (std::isdigit(static_cast<unsigned char>(text[i]))) {
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size() || text[i] != ']') malformed(text, "expected ]");
        std::size_t index = 0;
        try {
          index = std::stoull(text.substr(start, i - start));
        } catch (const std::exception&) {
          malformed(text, "index out of range");
        }
        ++i;
        expr.steps_.push_back({StepKind::index, "", index, {}, {}});
      } else {
        malformed(text, "unsupported bracket form");
      }
    } else {
      malformed(text, "unexpected character");
    }
  }
  return expr;
}

std::vector<json> PathExpression::evaluate(const json& doc) const {
  std::vector<const json*> nodes{&doc};
  for (const auto& step : steps_) {
    std::vector<const json*> next;
    for (const json* n : nodes) {
      switch (step.kind) {
        case StepKind::field: {
          if (n->is_object()) {
            auto it = n->find(step.field);
            if (it != n->end()) next.push_back(&*it);
          }
          break;
        }
        case StepKind::wildcard: {
          if (n->is_object() || n->is_array()) {
            for (const auto& child : *n) next.push_back(&child);
          }
          break;
        }
        case StepKind::index: {
          if (n->is_array() && step.index < n->size()) next.push_back(&(*n)[step.index]);
          break;
        }
        case StepKind::filter: {
          auto matches = [&step](const json& candidate) {
            const json* leaf = &candidate;
            for (const auto& name : step.filter_path) {
              if (!leaf->is_object()) return false;
              auto it = leaf->find(name);
              if (it == leaf->end()) return false;
              leaf = &*it;
            }
            return *leaf == step.filter_value;
          };
          if (n->is_array()) {
            for (const auto& child : *n)
              if (matches(child)) next.push_back(&child);
          } else if (n->is_object() && matches(*n)) {
            next.push_back(n);
          }
          break;
        }
      }
    }
    nodes = std::move(next);
  }
  std::vector<json> out;
  out.reserve(nodes.size());
  for (const json* n : nodes) out.push_back(*n);
  return out;
}

bool PathExpression::selects(const json& doc) const { return !evaluate(doc).empty(); }

}  // namespace swarmloop::directory
