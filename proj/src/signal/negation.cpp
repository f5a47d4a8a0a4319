#include <cctype>
#include <optional>

#include "geolm/signal/restructure.hpp"

namespace geolm::signal {

namespace {

struct Word {
  std::size_t begin;
  std::size_t end;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '\''; }

std::vector<Word> words(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_letter(s[i])) ++i;
    const std::size_t b = i;
    while (i < s.size() && is_letter(s[i])) ++i;
    if (i > b) out.push_back({b, i});
  }
  return out;
}

// Matches the capitalisation of `original` onto `replacement`.
std::string match_case(std::string_view original, std::string replacement) {
  if (!original.empty() && std::isupper(static_cast<unsigned char>(original.front()))) {
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  }
  return replacement;
}

}  // namespace

std::string negate_statement(std::string_view statement) {
  const auto ws = words(statement);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const std::string_view word = statement.substr(ws[i].begin, ws[i].end - ws[i].begin);
    const std::string w = lower(word);

    std::optional<std::string> replacement;
    if (w == "is" || w == "are" || w == "was" || w == "were" || w == "can" || w == "does" || w == "do") {
      // Already negated: remove the "not" that follows.
      if (i + 1 < ws.size() && lower(statement.substr(ws[i + 1].begin, ws[i + 1].end - ws[i + 1].begin)) == "not") {
        std::string out(statement.substr(0, ws[i].end));
        out += statement.substr(ws[i + 1].end);
        return out;
      }
      replacement = std::string(word) + " not";
    } else if (w == "has") {
      replacement = match_case(word, "does not have");
    } else if (w == "have") {
      replacement = match_case(word, "do not have");
    }
    if (replacement) {
      std::string out(statement.substr(0, ws[i].begin));
      out += *replacement;
      out += statement.substr(ws[i].end);
      return out;
    }
  }
  throw Error(ErrorCode::kNoNegationSite, "no copula or auxiliary in '" + std::string(statement) + "'");
}

}  // namespace geolm::signal
