#pragma once

#include <string>

#include "scalewise/scale.hpp"
#include "scalewise/session.hpp"

namespace scalewise {

namespace detail {

inline std::string table_cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '\n' || c == '\r') out += ' ';
    else if (c == '|') out += "\\|";
    else out += c;
  }
  return out;
}

inline std::string or_unavailable(const std::string& s) { return s.empty() ? "(not available)" : s; }

}  // namespace detail

// Markdown report. Deterministic in its inputs.
inline std::string render_report(const AssessmentResult& result, const Scale& scale) {
  std::string out;
  out += "# Assessment report: " + scale.name + "\n\n";
  out += "- Total score: " + std::to_string(result.total) + " / " + std::to_string(scale.max_total()) + "\n";
  out += "- Category: " + result.category + "\n";
  if (result.update_skipped)
    out += "\n> Notice: the final whole-session update was skipped. Final scores equal the per-topic scores.\n";

  out += "\n## Topic scores\n\n";
  out += "| # | Topic | Initial | Final | Changed | Summary |\n";
  out += "|---|-------|---------|-------|---------|---------|\n";
  for (const auto& topic : scale.topics) {
    const auto k = static_cast<std::size_t>(topic.index - 1);
    const int before = k < result.pre_update_scores.size() ? result.pre_update_scores[k] : 0;
    const int after = k < result.final_scores.size() ? result.final_scores[k] : 0;
    const auto* node = result.memory.find_topic(topic.index);
    out += "| " + std::to_string(topic.index) + " | " + detail::table_cell(topic.name) + " | " +
           std::to_string(before) + " | " + std::to_string(after) + " | " + (before != after ? "yes" : "") +
           " | " + detail::table_cell(node ? node->summary : "") + " |\n";
  }

  out += "\n## Reasoning\n\n" + detail::or_unavailable(result.reasoning) + "\n";
  out += "\n## Overall summary\n\n" + detail::or_unavailable(result.overall_summary) + "\n";
  out += "\n## Suggestions\n\n" + detail::or_unavailable(result.suggestions) + "\n";
  return out;
}

}  // namespace scalewise
