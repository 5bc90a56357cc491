#pragma once

// Accuracy tables in the "mean (difference)" layout.

#include <cstdint>
#include <string>
#include <vector>

#include "uda/harness.hpp"

namespace uda {

struct ReportRow {
  std::string algorithm;
  std::string task;
  double mean = 0.0;            // mean best target accuracy, in [0, 1]
  double delta = 0.0;           // mean - SourceOnly mean on the same task
  std::vector<double> per_seed;
  double mean_final = 0.0;      // markdown only
  double wall_seconds = 0.0;    // markdown only
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportTable {
  std::vector<std::uint64_t> seeds;
  std::vector<ReportRow> rows;
  friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

// Rows in result order. Throws ConfigError when a task has no SourceOnly row
// or the seed lists differ.
ReportTable build_report(const std::vector<TaskResult>& results);

enum class ReportFormat { kCsv, kMarkdown };

// Percentages with one decimal; delta as "(+x.x)" / "(-x.x)".
std::string render_report(const ReportTable& t, ReportFormat f);
void emit_report(const ReportTable& t, ReportFormat f, const std::string& path);

// Inverse of the csv rendering. Values come back at the printed precision,
// so render(parse(render(t))) == render(t).
ReportTable parse_report_csv(const std::string& text);

}  // namespace uda
