#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uda/error.hpp"
#include "uda/report.hpp"

using namespace uda;

namespace {

TaskResult result(const std::string& algo, const std::string& task, std::vector<double> best,
                  bool source_only = false) {
  TaskResult r;
  r.algorithm = algo;
  r.task = task;
  r.source_only = source_only;
  for (std::size_t i = 0; i < best.size(); ++i) {
    SeedResult s;
    s.seed = 10 + i;
    s.best = best[i];
    s.final = best[i] - 0.01;
    s.curve = {0.5, best[i]};
    r.seeds.push_back(s);
    r.mean_best += best[i] / best.size();
    r.mean_final += s.final / best.size();
  }
  r.wall_seconds = 1.25;
  return r;
}

std::vector<TaskResult> sample_results() {
  return {result("source_only", "a_to_b", {0.70, 0.74}, true),
          result("source_only", "b_to_a", {0.81, 0.80}, true),
          result("dann", "a_to_b", {0.90, 0.812}),
          result("dann", "b_to_a", {0.75, 0.7777})};
}

}  // namespace

TEST(Report, DeltaAgainstSourceOnly) {
  const auto results = sample_results();
  const ReportTable t = build_report(results);
  EXPECT_EQ(t.seeds, (std::vector<std::uint64_t>{10, 11}));
  ASSERT_EQ(t.rows.size(), 4u);
  for (const ReportRow& r : t.rows) {
    double base = 0;
    for (const TaskResult& x : results) {
      if (x.source_only && x.task == r.task) base = x.mean_best;
    }
    EXPECT_NEAR(r.delta, r.mean - base, 1e-12);
  }
  EXPECT_EQ(t.rows[0].delta, 0.0);
}

TEST(Report, CsvLayout) {
  const std::string csv = render_report(build_report(sample_results()), ReportFormat::kCsv);
  EXPECT_EQ(csv,
            "algorithm,task,mean,delta,seed_10,seed_11\n"
            "source_only,a_to_b,72.0,(+0.0),70.0,74.0\n"
            "source_only,b_to_a,80.5,(+0.0),81.0,80.0\n"
            "dann,a_to_b,85.6,(+13.6),90.0,81.2\n"
            "dann,b_to_a,76.4,(-4.1),75.0,77.8\n");
}

TEST(Report, EmptyTableIsHeaderOnly) {
  const ReportTable t;
  EXPECT_EQ(render_report(t, ReportFormat::kCsv), "algorithm,task,mean,delta\n");
  const std::string md = render_report(t, ReportFormat::kMarkdown);
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 2);
}

TEST(Report, MarkdownHasFinalAndWall) {
  const std::string md = render_report(build_report(sample_results()), ReportFormat::kMarkdown);
  std::istringstream in(md);
  std::string header, rule, first;
  std::getline(in, header);
  std::getline(in, rule);
  std::getline(in, first);
  EXPECT_EQ(header, "| algorithm | task | mean | delta | seed 10 | seed 11 | final | wall (s) |");
  EXPECT_EQ(first, "| source_only | a_to_b | 72.0 | (+0.0) | 70.0 | 74.0 | 71.0 | 1.25 |");
}

TEST(Report, CsvRoundTrip) {
  const ReportTable t = build_report(sample_results());
  const std::string csv = render_report(t, ReportFormat::kCsv);
  const ReportTable back = parse_report_csv(csv);
  EXPECT_EQ(render_report(back, ReportFormat::kCsv), csv);
  EXPECT_EQ(back.seeds, t.seeds);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].algorithm, t.rows[i].algorithm);
    EXPECT_EQ(back.rows[i].task, t.rows[i].task);
    EXPECT_NEAR(back.rows[i].mean, t.rows[i].mean, 0.0005 + 1e-12);
  }
  EXPECT_EQ(parse_report_csv("algorithm,task,mean,delta\n"), ReportTable{});
}

TEST(Report, Errors) {
  auto results = sample_results();
  results.erase(results.begin());
  EXPECT_THROW(build_report(results), ConfigError);
  results = sample_results();
  results[2].seeds.pop_back();
  EXPECT_THROW(build_report(results), ConfigError);
  EXPECT_THROW(parse_report_csv(""), ParseError);
  EXPECT_THROW(parse_report_csv("algo,task\n"), ParseError);
  EXPECT_THROW(parse_report_csv("algorithm,task,mean,delta\nx,y,1.0\n"), ParseError);
  EXPECT_THROW(parse_report_csv("algorithm,task,mean,delta\nx,y,1.0,+2\n"), ParseError);
  const auto dir = std::filesystem::temp_directory_path() / "udakit_no_such_dir" / "r.csv";
  EXPECT_THROW(emit_report(ReportTable{}, ReportFormat::kCsv, dir.string()), IoError);
}

TEST(Report, EmitWritesRenderedText) {
  const ReportTable t = build_report(sample_results());
  const auto p = std::filesystem::temp_directory_path() / "udakit_report.md";
  emit_report(t, ReportFormat::kMarkdown, p.string());
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  EXPECT_EQ(s.str(), render_report(t, ReportFormat::kMarkdown));
}
