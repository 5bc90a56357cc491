#include "uda/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "uda/error.hpp"

namespace uda {

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string signed_delta(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", 100.0 * v);
  std::string s = buf;
  if (s == "-0.0") s = "+0.0";
  return "(" + s + ")";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("report line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

ReportTable build_report(const std::vector<TaskResult>& results) {
  ReportTable t;
  std::map<std::string, const TaskResult*> baseline;
  for (const TaskResult& r : results) {
    std::vector<std::uint64_t> seeds;
    for (const SeedResult& s : r.seeds) seeds.push_back(s.seed);
    if (&r == &results.front()) {
      t.seeds = seeds;
    } else if (seeds != t.seeds) {
      throw ConfigError("report: task " + r.task + " ran a different seed list");
    }
    if (r.source_only) baseline[r.task] = &r;
  }
  for (const TaskResult& r : results) {
    const auto it = baseline.find(r.task);
    if (it == baseline.end()) throw ConfigError("report: no source_only row for " + r.task);
    ReportRow row;
    row.algorithm = r.algorithm;
    row.task = r.task;
    row.mean = r.mean_best;
    row.delta = r.mean_best - it->second->mean_best;
    for (const SeedResult& s : r.seeds) row.per_seed.push_back(s.best);
    row.mean_final = r.mean_final;
    row.wall_seconds = r.wall_seconds;
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string render_report(const ReportTable& t, ReportFormat f) {
  std::ostringstream out;
  if (f == ReportFormat::kCsv) {
    out << "algorithm,task,mean,delta";
    for (auto s : t.seeds) out << ",seed_" << s;
    out << '\n';
    for (const ReportRow& r : t.rows) {
      out << r.algorithm << ',' << r.task << ',' << percent(r.mean) << ',' << signed_delta(r.delta);
      for (double v : r.per_seed) out << ',' << percent(v);
      out << '\n';
    }
    return out.str();
  }

  out << "| algorithm | task | mean | delta |";
  for (auto s : t.seeds) out << " seed " << s << " |";
  out << " final | wall (s) |\n|---|---|---:|---:|";
  for (std::size_t i = 0; i < t.seeds.size(); ++i) out << "---:|";
  out << "---:|---:|\n";
  for (const ReportRow& r : t.rows) {
    out << "| " << r.algorithm << " | " << r.task << " | " << percent(r.mean) << " | "
        << signed_delta(r.delta) << " |";
    for (double v : r.per_seed) out << ' ' << percent(v) << " |";
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.2f", r.wall_seconds);
    out << ' ' << percent(r.mean_final) << " | " << wall << " |\n";
  }
  return out.str();
}

void emit_report(const ReportTable& t, ReportFormat f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << render_report(t, f);
  if (!out) throw IoError("write failed: " + path);
}

ReportTable parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report: missing header");
  const auto header = split(line, ',');
  if (header.size() < 4 || header[0] != "algorithm" || header[1] != "task" || header[2] != "mean" ||
      header[3] != "delta") {
    throw ParseError("report: unexpected header '" + line + "'");
  }
  ReportTable t;
  for (std::size_t i = 4; i < header.size(); ++i) {
    if (header[i].rfind("seed_", 0) != 0) throw ParseError("report: bad seed column " + header[i]);
    t.seeds.push_back(std::stoull(header[i].substr(5)));
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("report line " + std::to_string(n) + ": expected " +
                       std::to_string(header.size()) + " cells");
    }
    ReportRow r;
    r.algorithm = cells[0];
    r.task = cells[1];
    r.mean = parse_number(cells[2], n) / 100.0;
    const std::string& d = cells[3];
    if (d.size() < 3 || d.front() != '(' || d.back() != ')') {
      throw ParseError("report line " + std::to_string(n) + ": bad delta '" + d + "'");
    }
    r.delta = parse_number(d.substr(1, d.size() - 2), n) / 100.0;
    for (std::size_t i = 4; i < cells.size(); ++i) r.per_seed.push_back(parse_number(cells[i], n) / 100.0);
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace uda
