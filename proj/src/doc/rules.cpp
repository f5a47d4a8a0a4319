#include <cctype>
#include <charconv>
#include <sstream>

#include "geolm/common/error.hpp"
#include "geolm/doc/normalize.hpp"
#include "text_util.hpp"

namespace geolm::doc {

namespace {

constexpr int kMaxCleaningPasses = 32;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Parses a TOML basic string ("...") with the usual backslash escapes.
std::string parse_toml_string(std::string_view v, std::size_t line_no) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": expected quoted string");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    char c = v[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (i + 2 >= v.size()) throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": dangling escape");
    switch (v[++i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default:
        throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": unsupported escape");
    }
  }
  return out;
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

CleaningRule::Action parse_action(const std::string& s) {
  if (s == "drop_span") return CleaningRule::Action::kDropSpan;
  if (s == "drop_block") return CleaningRule::Action::kDropBlock;
  if (s == "replace") return CleaningRule::Action::kReplace;
  throw Error(ErrorCode::kFormat, "unknown rule action '" + s + "'");
}

bool is_wordish(unsigned char c) {
  if (c >= 0x80) return true;
  if (std::isalnum(c) || std::isspace(c)) return true;
  static constexpr std::string_view kPunct = ".,;:!?'\"()-%/";
  return kPunct.find(static_cast<char>(c)) != std::string_view::npos;
}

}  // namespace

std::string sanitize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if ((c < 0x20 && c != '\n' && c != '\t') || c == 0x7f) continue;
    out.push_back(static_cast<char>(c));
  }
  return strip_reserved_literals(std::move(out));
}

std::string collapse_whitespace(std::string_view text, bool keep_newlines) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  bool pending_newline = false;
  for (char c : text) {
    if (c == '\n' && keep_newlines) {
      pending_newline = true;
      pending_space = false;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (!out.empty()) {
      if (pending_newline) {
        out.push_back('\n');
      } else if (pending_space) {
        out.push_back(' ');
      }
    }
    pending_space = pending_newline = false;
    out.push_back(c);
  }
  return out;
}

void CleaningRuleSet::add_rule(std::string pattern, CleaningRule::Action action, std::string replacement) {
  CleaningRule rule;
  try {
    rule.compiled = std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "bad rule pattern '" + pattern + "': " + e.what());
  }
  if (std::regex_match(std::string(), rule.compiled)) {
    throw Error(ErrorCode::kInvalidArgument, "rule pattern '" + pattern + "' matches the empty string");
  }
  if (action != CleaningRule::Action::kReplace) replacement.clear();
  if (action == CleaningRule::Action::kReplace) {
    if (std::regex_search(replacement, rule.compiled)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "replacement '" + replacement + "' reintroduces pattern '" + pattern + "'");
    }
    if (strip_reserved_literals(replacement) != replacement) {
      throw Error(ErrorCode::kInvalidArgument, "replacement '" + replacement + "' contains a reserved marker");
    }
  }
  rule.pattern = std::move(pattern);
  rule.action = action;
  rule.replacement = std::move(replacement);
  rules.push_back(std::move(rule));
}

CleaningRuleSet parse_rules(std::string_view text) {
  CleaningRuleSet set;
  struct Pending {
    std::optional<std::string> pattern, action, replacement;
    std::size_t line = 0;
  };
  std::optional<Pending> pending;
  auto flush = [&]() {
    if (!pending) return;
    if (!pending->pattern || !pending->action) {
      throw Error(ErrorCode::kFormat,
                  "rules line " + std::to_string(pending->line) + ": [[rule]] needs pattern and action");
    }
    set.add_rule(*pending->pattern, parse_action(*pending->action), pending->replacement.value_or(""));
    pending.reset();
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line == "[[rule]]") {
      flush();
      pending = Pending{};
      pending->line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (pending) {
      const std::string s = parse_toml_string(value, line_no);
      if (key == "pattern") {
        pending->pattern = s;
      } else if (key == "action") {
        pending->action = s;
      } else if (key == "replacement") {
        pending->replacement = s;
      } else {
        throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": unknown rule key " + key);
      }
    } else if (key == "min_paragraph_chars") {
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || p != value.data() + value.size()) {
        throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": bad integer");
      }
      set.min_paragraph_chars = v;
    } else if (key == "max_nonword_ratio") {
      double v = 0;
      try {
        std::size_t used = 0;
        v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": bad number");
      }
      if (v < 0.0 || v > 1.0) throw Error(ErrorCode::kInvalidArgument, "max_nonword_ratio outside [0,1]");
      set.max_nonword_ratio = v;
    } else {
      throw Error(ErrorCode::kFormat, "rules line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }
  flush();
  return set;
}

CleaningRuleSet load_rules(const std::string& path) { return parse_rules(read_file(path)); }

double nonword_ratio(std::string_view text) {
  if (text.empty()) return 0.0;
  std::size_t bad = 0;
  for (unsigned char c : text) {
    if (!is_wordish(c)) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(text.size());
}

namespace {

// Replacement strings are literal text; escape '$' so regex_replace does not
// treat it as a back-reference.
std::string literal_format(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '$') out += '$';
    out += c;
  }
  return out;
}

}  // namespace

std::optional<std::string> clean_paragraph(std::string_view text, const CleaningRuleSet& rules) {
  std::string current = collapse_whitespace(sanitize_text(text), /*keep_newlines=*/true);
  for (int pass = 0; pass < kMaxCleaningPasses; ++pass) {
    std::string next = current;
    for (const auto& rule : rules.rules) {
      switch (rule.action) {
        case CleaningRule::Action::kDropBlock:
          if (std::regex_search(next, rule.compiled)) return std::nullopt;
          break;
        case CleaningRule::Action::kDropSpan:
          next = std::regex_replace(next, rule.compiled, "");
          break;
        case CleaningRule::Action::kReplace:
          next = std::regex_replace(next, rule.compiled, literal_format(rule.replacement));
          break;
      }
    }
    next = collapse_whitespace(sanitize_text(next), /*keep_newlines=*/true);
    if (next == current) break;
    current = std::move(next);
  }
  if (current.size() < rules.min_paragraph_chars) return std::nullopt;
  if (nonword_ratio(current) > rules.max_nonword_ratio) return std::nullopt;
  return current;
}

}  // namespace geolm::doc
