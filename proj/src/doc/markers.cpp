#include <algorithm>

#include "geolm/doc/normalize.hpp"

namespace geolm::doc {

std::string_view start_marker(MarkerKind k) {
  switch (k) {
    case MarkerKind::kFigure: return "[START_FIGURE]";
    case MarkerKind::kTable: return "[START_TABLE]";
    case MarkerKind::kRef: return "[START_REF]";
    case MarkerKind::kFormula: return "[START_FORMULA]";
  }
  return {};
}

std::string_view end_marker(MarkerKind k) {
  switch (k) {
    case MarkerKind::kFigure: return "[END_FIGURE]";
    case MarkerKind::kTable: return "[END_TABLE]";
    case MarkerKind::kRef: return "[END_REF]";
    case MarkerKind::kFormula: return "[END_FORMULA]";
  }
  return {};
}

std::string_view marker_name(MarkerKind k) {
  switch (k) {
    case MarkerKind::kFigure: return "FIGURE";
    case MarkerKind::kTable: return "TABLE";
    case MarkerKind::kRef: return "REF";
    case MarkerKind::kFormula: return "FORMULA";
  }
  return {};
}

std::string wrap_marker(MarkerKind k, std::string_view body) {
  std::string out;
  out.reserve(body.size() + 32);
  out += start_marker(k);
  out += body;
  out += end_marker(k);
  return out;
}

std::string strip_reserved_literals(std::string text) {
  // Removing one literal can splice two fragments into another, so loop.
  bool changed = true;
  while (changed) {
    changed = false;
    auto erase_all = [&](std::string_view lit) {
      for (auto pos = text.find(lit); pos != std::string::npos; pos = text.find(lit, pos)) {
        text.erase(pos, lit.size());
        changed = true;
      }
    };
    for (MarkerKind k : kMarkerKinds) {
      erase_all(start_marker(k));
      erase_all(end_marker(k));
    }
    erase_all(kDocBoundary);
  }
  return text;
}

bool ValidationReport::balanced(MarkerKind k) const {
  const std::string name(marker_name(k));
  auto get = [&](const std::map<std::string, std::size_t>& m) {
    auto it = m.find(name);
    return it == m.end() ? std::size_t{0} : it->second;
  };
  if (get(start_counts) != get(end_counts)) return false;
  return std::none_of(violations.begin(), violations.end(),
                      [&](const MarkerViolation& v) { return v.marker == k; });
}

ValidationReport validate_markers(std::string_view text) {
  ValidationReport report;
  std::optional<std::pair<MarkerKind, std::size_t>> open;

  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    bool matched = false;
    for (MarkerKind k : kMarkerKinds) {
      const auto s = start_marker(k);
      const auto e = end_marker(k);
      if (text.substr(pos, s.size()) == s) {
        ++report.start_counts[std::string(marker_name(k))];
        if (open) {
          report.violations.push_back({MarkerViolation::Kind::kNested, k, pos});
        } else {
          open = std::make_pair(k, pos);
        }
        pos += s.size();
        matched = true;
        break;
      }
      if (text.substr(pos, e.size()) == e) {
        ++report.end_counts[std::string(marker_name(k))];
        if (!open) {
          report.violations.push_back({MarkerViolation::Kind::kUnmatchedEnd, k, pos});
        } else if (open->first != k) {
          report.violations.push_back({MarkerViolation::Kind::kMismatchedEnd, k, pos});
        } else {
          open.reset();
        }
        pos += e.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++pos;
  }
  if (open) report.violations.push_back({MarkerViolation::Kind::kUnclosedStart, open->first, open->second});
  report.ok = report.violations.empty();
  return report;
}

}  // namespace geolm::doc
