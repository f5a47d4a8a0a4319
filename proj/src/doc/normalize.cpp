#include "geolm/doc/normalize.hpp"

#include <vector>

#include "geolm/common/error.hpp"
#include "geolm/lm/tokenizer.hpp"
#include "text_util.hpp"

namespace geolm::doc {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kPaper: return "paper";
    case Source::kPaperMetadata: return "paper_metadata";
    case Source::kWiki: return "wiki";
  }
  return "paper";
}

Source parse_source(std::string_view s) {
  if (s == "paper") return Source::kPaper;
  if (s == "paper_metadata") return Source::kPaperMetadata;
  if (s == "wiki") return Source::kWiki;
  throw Error(ErrorCode::kFormat, "unknown document source '" + std::string(s) + "'");
}

std::string render_figure(const FigureCaption& f) {
  const std::string body = collapse_whitespace(sanitize_text(f.text), /*keep_newlines=*/false);
  if (body.empty()) return {};
  return wrap_marker(MarkerKind::kFigure, body);
}

std::string render_citation(const CitationSpan& c, std::size_t& unresolved) {
  std::string title;
  if (c.resolved_title) title = collapse_whitespace(sanitize_text(*c.resolved_title), false);
  if (title.empty()) {
    ++unresolved;
    return {};
  }
  return wrap_marker(MarkerKind::kRef, title);
}

std::string render_formula(const Formula& f) {
  std::string text = sanitize_text(f.text);
  // Unbalanced braces become spaces; balanced pairs are kept.
  std::vector<std::size_t> open;
  std::vector<bool> drop(text.size(), false);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      open.push_back(i);
    } else if (text[i] == '}') {
      if (open.empty()) {
        drop[i] = true;
      } else {
        open.pop_back();
      }
    }
  }
  for (std::size_t i : open) drop[i] = true;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (drop[i]) text[i] = ' ';
  }
  const std::string body = collapse_whitespace(text, /*keep_newlines=*/false);
  if (body.empty()) return {};
  return wrap_marker(MarkerKind::kFormula, body);
}

NormalizedDocument normalize_document(const RawDocument& doc, const CleaningRuleSet& rules) {
  NormalizedDocument out;
  out.doc_id = doc.doc_id;
  out.source = doc.source;

  std::vector<std::string> parts;
  parts.reserve(doc.blocks.size());
  for (std::size_t i = 0; i < doc.blocks.size(); ++i) {
    std::string rendered;
    try {
      rendered = std::visit(
          [&](const auto& b) -> std::string {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, Paragraph>) {
              return clean_paragraph(b.text, rules).value_or("");
            } else if constexpr (std::is_same_v<B, FigureCaption>) {
              return render_figure(b);
            } else if constexpr (std::is_same_v<B, Table>) {
              return render_table(b);
            } else if constexpr (std::is_same_v<B, CitationSpan>) {
              return render_citation(b, out.unresolved_citations);
            } else {
              return render_formula(b);
            }
          },
          doc.blocks[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMalformedBlock) throw;
      throw Error(ErrorCode::kMalformedBlock,
                  "document '" + doc.doc_id + "' block " + std::to_string(i) + ": " + e.what());
    }
    if (!rendered.empty()) parts.push_back(std::move(rendered));
  }

  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.text += "\n\n";
    out.text += parts[i];
  }
  out.token_estimate = lm::ByteTokenizer::count(out.text);
  return out;
}

void CorpusStats::add(const NormalizedDocument& d) {
  const std::string src(to_string(d.source));
  ++documents;
  tokens += d.token_estimate;
  unresolved_citations += d.unresolved_citations;
  ++documents_by_source[src];
  tokens_by_source[src] += d.token_estimate;
  const auto report = validate_markers(d.text);
  for (const auto& [name, n] : report.start_counts) markers_by_kind[name] += n;
}

void CorpusStats::merge(const CorpusStats& other) {
  documents += other.documents;
  tokens += other.tokens;
  unresolved_citations += other.unresolved_citations;
  for (const auto& [k, v] : other.documents_by_source) documents_by_source[k] += v;
  for (const auto& [k, v] : other.tokens_by_source) tokens_by_source[k] += v;
  for (const auto& [k, v] : other.markers_by_kind) markers_by_kind[k] += v;
}

Json CorpusStats::to_json() const {
  Json j;
  j["documents"] = documents;
  j["tokens"] = tokens;
  j["unresolved_citations"] = unresolved_citations;
  j["documents_by_source"] = Json::object();
  for (const auto& [k, v] : documents_by_source) j["documents_by_source"][k] = v;
  j["tokens_by_source"] = Json::object();
  for (const auto& [k, v] : tokens_by_source) j["tokens_by_source"][k] = v;
  j["markers_by_kind"] = Json::object();
  for (const auto& [k, v] : markers_by_kind) j["markers_by_kind"][k] = v;
  return j;
}

RawDocument raw_document_from_json(const Json& j) {
  RawDocument d;
  try {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.source = parse_source(j.at("source").get<std::string>());
    for (const auto& b : j.at("blocks")) {
      const auto kind = b.at("kind").get<std::string>();
      if (kind == "paragraph") {
        d.blocks.emplace_back(Paragraph{b.at("text").get<std::string>()});
      } else if (kind == "figure_caption") {
        d.blocks.emplace_back(FigureCaption{b.at("text").get<std::string>()});
      } else if (kind == "table") {
        Table t;
        t.cells = b.at("cells").get<std::vector<std::vector<std::string>>>();
        t.header_rows = b.value("header_rows", std::size_t{0});
        d.blocks.emplace_back(std::move(t));
      } else if (kind == "citation") {
        CitationSpan c;
        c.marker_text = b.value("marker_text", std::string());
        if (b.contains("resolved_title") && !b["resolved_title"].is_null()) {
          c.resolved_title = b["resolved_title"].get<std::string>();
        }
        d.blocks.emplace_back(std::move(c));
      } else if (kind == "formula") {
        d.blocks.emplace_back(Formula{b.at("text").get<std::string>()});
      } else {
        throw Error(ErrorCode::kFormat, "unknown block kind '" + kind + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("raw document: ") + e.what());
  }
  if (d.doc_id.empty()) throw Error(ErrorCode::kFormat, "raw document with empty doc_id");
  return d;
}

Json raw_document_to_json(const RawDocument& d) {
  Json j;
  j["doc_id"] = d.doc_id;
  j["source"] = std::string(to_string(d.source));
  j["blocks"] = Json::array();
  for (const auto& block : d.blocks) {
    Json b;
    std::visit(
        [&](const auto& x) {
          using B = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<B, Paragraph>) {
            b["kind"] = "paragraph";
            b["text"] = x.text;
          } else if constexpr (std::is_same_v<B, FigureCaption>) {
            b["kind"] = "figure_caption";
            b["text"] = x.text;
          } else if constexpr (std::is_same_v<B, Table>) {
            b["kind"] = "table";
            b["cells"] = x.cells;
            b["header_rows"] = x.header_rows;
          } else if constexpr (std::is_same_v<B, CitationSpan>) {
            b["kind"] = "citation";
            b["marker_text"] = x.marker_text;
            b["resolved_title"] = x.resolved_title ? Json(*x.resolved_title) : Json(nullptr);
          } else {
            b["kind"] = "formula";
            b["text"] = x.text;
          }
        },
        block);
    j["blocks"].push_back(std::move(b));
  }
  return j;
}

Json normalized_to_json(const NormalizedDocument& d) {
  Json j;
  j["doc_id"] = d.doc_id;
  j["source"] = std::string(to_string(d.source));
  j["text"] = d.text;
  return j;
}

NormalizedDocument normalized_from_json(const Json& j) {
  NormalizedDocument d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.source = parse_source(j.at("source").get<std::string>());
  d.text = j.at("text").get<std::string>();
  d.token_estimate = lm::ByteTokenizer::count(d.text);
  return d;
}

}  // namespace geolm::doc
