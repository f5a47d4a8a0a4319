#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geolm/common/io.hpp"

namespace geolm::doc {

enum class Source { kPaper, kPaperMetadata, kWiki };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);

struct Paragraph {
  std::string text;
};
struct FigureCaption {
  std::string text;
};
struct Table {
  std::vector<std::vector<std::string>> cells;  // row-major
  std::size_t header_rows = 0;
};
struct CitationSpan {
  std::string marker_text;
  std::optional<std::string> resolved_title;
};
struct Formula {
  std::string text;
};

using RawBlock = std::variant<Paragraph, FigureCaption, Table, CitationSpan, Formula>;

struct RawDocument {
  std::string doc_id;
  Source source = Source::kPaper;
  std::vector<RawBlock> blocks;
};

struct NormalizedDocument {
  std::string doc_id;
  Source source = Source::kPaper;
  std::string text;
  std::size_t token_estimate = 0;
  std::size_t unresolved_citations = 0;
};

// --- markers -----------------------------------------------------------

enum class MarkerKind { kFigure, kTable, kRef, kFormula };
inline constexpr std::array<MarkerKind, 4> kMarkerKinds = {MarkerKind::kFigure, MarkerKind::kTable,
                                                           MarkerKind::kRef, MarkerKind::kFormula};

std::string_view start_marker(MarkerKind k);
std::string_view end_marker(MarkerKind k);
std::string_view marker_name(MarkerKind k);

// Wraps already-clean text in the start/end pair for `k`.
std::string wrap_marker(MarkerKind k, std::string_view body);

inline constexpr std::string_view kDocBoundary = "<|doc|>";
inline constexpr std::string_view kCorpusSeparator = "\n<|doc|>\n";

// Removes every reserved marker literal and the document boundary literal
// from `text`, repeating until none is left.
std::string strip_reserved_literals(std::string text);

struct MarkerViolation {
  enum class Kind { kNested, kUnmatchedEnd, kMismatchedEnd, kUnclosedStart };
  Kind kind;
  MarkerKind marker;
  std::size_t offset;  // byte offset of the offending marker
};

struct ValidationReport {
  bool ok = true;
  std::map<std::string, std::size_t> start_counts;  // by marker name
  std::map<std::string, std::size_t> end_counts;
  std::vector<MarkerViolation> violations;

  bool balanced(MarkerKind k) const;
};

ValidationReport validate_markers(std::string_view text);

// --- cleaning ----------------------------------------------------------

struct CleaningRule {
  enum class Action { kDropSpan, kDropBlock, kReplace };
  std::string pattern;
  Action action = Action::kDropSpan;
  std::string replacement;  // kReplace only
  std::regex compiled;
};

struct CleaningRuleSet {
  std::vector<CleaningRule> rules;
  std::size_t min_paragraph_chars = 30;
  double max_nonword_ratio = 0.4;

  // Throws kInvalidArgument on a bad regex, a ratio outside [0,1], or a
  // replacement that matches its own pattern (that would break idempotence).
  void add_rule(std::string pattern, CleaningRule::Action action, std::string replacement = {});
};

// Parses the small TOML subset used for rule files:
//
//   min_paragraph_chars = 30
//   max_nonword_ratio = 0.4
//   [[rule]]
//   pattern = "\\(cid:\\d+\\)"
//   action = "drop_span"            # drop_span | drop_block | replace
//   replacement = "..."             # replace only
CleaningRuleSet parse_rules(std::string_view text);
CleaningRuleSet load_rules(const std::string& path);

// Fraction of bytes that are neither ASCII alphanumerics, whitespace, common
// sentence punctuation, nor part of a multibyte UTF-8 sequence.
double nonword_ratio(std::string_view text);

// Applies the rule list to a paragraph until it stops changing, then the two
// built-in heuristics. Returns nullopt when the paragraph is dropped.
std::optional<std::string> clean_paragraph(std::string_view text, const CleaningRuleSet& rules);

// --- rendering ---------------------------------------------------------

std::string render_table(const Table& t);
std::string render_figure(const FigureCaption& f);

// Returns "" and bumps `unresolved` when the citation has no title.
std::string render_citation(const CitationSpan& c, std::size_t& unresolved);
std::string render_formula(const Formula& f);

// Inverse of the table body emitted by render_table (markers included).
struct ParsedTable {
  std::vector<std::vector<std::string>> cells;
  std::size_t header_rows = 0;
};
ParsedTable parse_markdown_table(std::string_view rendered);

// Throws Error(kMalformedBlock) naming doc_id and block index on a ragged table.
NormalizedDocument normalize_document(const RawDocument& doc, const CleaningRuleSet& rules);

// --- stats -------------------------------------------------------------

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t tokens = 0;
  std::size_t unresolved_citations = 0;
  std::map<std::string, std::size_t> documents_by_source;
  std::map<std::string, std::size_t> tokens_by_source;
  std::map<std::string, std::size_t> markers_by_kind;  // counts of start markers

  void add(const NormalizedDocument& d);
  // Associative, commutative.
  void merge(const CorpusStats& other);
  Json to_json() const;
};

template <typename Range>
CorpusStats corpus_stats(const Range& docs) {
  CorpusStats s;
  for (const auto& d : docs) s.add(d);
  return s;
}

// --- JSON --------------------------------------------------------------

RawDocument raw_document_from_json(const Json& j);
Json raw_document_to_json(const RawDocument& d);
Json normalized_to_json(const NormalizedDocument& d);
NormalizedDocument normalized_from_json(const Json& j);

}  // namespace geolm::doc
