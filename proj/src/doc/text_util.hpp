#pragma once

#include <string>
#include <string_view>

namespace geolm::doc {

// Drops control bytes (other than newline and tab) and reserved literals.
std::string sanitize_text(std::string_view text);

// Collapses whitespace runs to one space and trims both ends. With
// keep_newlines, a run containing a newline becomes a single newline instead.
std::string collapse_whitespace(std::string_view text, bool keep_newlines);

}  // namespace geolm::doc
