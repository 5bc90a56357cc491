// bench: run benchmark matrices, gradient checks, data generation and
// embedding dumps from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "uda/config.hpp"
#include "uda/error.hpp"
#include "uda/gradcheck.hpp"
#include "uda/harness.hpp"
#include "uda/report.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw uda::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::size_t workers) {
  uda::BenchConfig cfg = uda::load_bench_config(config_path);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "resolved_config.json");
    if (!out) throw uda::IoError("cannot write to " + out_dir);
    out << cfg.resolved_json;
  }
  cfg.matrix.base.run_dir = out_dir;
  cfg.matrix.workers = workers;

  const auto tasks = uda::expand_matrix(cfg.matrix);
  std::cerr << cfg.name << ": " << tasks.size() << " tasks x " << cfg.matrix.base.seeds.size()
            << " seeds, " << workers << " worker(s)\n";
  const auto results = uda::run_matrix(cfg.matrix);
  const uda::ReportTable table = uda::build_report(results);
  uda::emit_report(table, uda::ReportFormat::kCsv, (fs::path(out_dir) / "report.csv").string());
  uda::emit_report(table, uda::ReportFormat::kMarkdown, (fs::path(out_dir) / "report.md").string());
  std::cout << uda::render_report(table, uda::ReportFormat::kMarkdown);

  int failed = 0;
  for (const auto& r : results) {
    for (const auto& s : r.seeds) {
      if (s.failed) {
        ++failed;
        std::cerr << "failed: " << r.algorithm << ' ' << r.task << " seed " << s.seed << " at step "
                  << s.failure_step << ": " << s.failure << '\n';
      }
    }
  }
  return failed == 0 ? 0 : 3;
}

int cmd_gradcheck(const uda::GradCheckSuiteOptions& opts) {
  const auto cases = uda::run_gradcheck_suite(opts);
  bool ok = true;
  for (const auto& c : cases) {
    std::printf("%-4s %-36s instances=%zu max_rel_error=%.3e\n", c.passed ? "ok" : "FAIL",
                c.name.c_str(), c.instances, c.max_rel_error);
    ok = ok && c.passed;
  }
  std::printf("%zu cases, %s\n", cases.size(), ok ? "all passed" : "FAILURES");
  return ok ? 0 : 1;
}

int cmd_gen(const std::string& spec_path, const std::string& out) {
  const uda::ShiftSpec spec = uda::parse_shift_spec(read_file(spec_path));
  const auto [source, target] = uda::make_shift_pair(spec);
  const fs::path p(out);
  const fs::path stem = p.parent_path() / p.stem();
  const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  const std::string src = stem.string() + "_source" + ext;
  const std::string tgt = stem.string() + "_target" + ext;
  uda::save_csv(source, src);
  uda::save_csv(target, tgt);
  std::cout << src << '\n' << tgt << '\n';
  return 0;
}

int cmd_embed(const std::string& checkpoint, const std::string& src, const std::string& tgt,
              const std::string& out, const std::string& label_column) {
  const uda::Checkpoint c = uda::load_checkpoint(checkpoint);
  const std::size_t classes = c.bundle.class_count();
  uda::Dataset s = uda::load_csv(src, label_column, label_column.empty() ? 0 : classes);
  uda::Dataset t = uda::load_csv(tgt, label_column, label_column.empty() ? 0 : classes);
  s.domain_tag = "source";
  t.domain_tag = "target";
  if (s.dim() != c.bundle.input_dim() || t.dim() != c.bundle.input_dim()) {
    throw uda::ShapeError("embed: csv width does not match the checkpoint input width " +
                          std::to_string(c.bundle.input_dim()));
  }
  uda::dump_embeddings(c.bundle, s, t, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised domain adaptation benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t workers = 1;
  auto* run = app.add_subcommand("run", "Run every task of a benchmark config");
  run->add_option("config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--workers", workers, "Parallel tasks")->check(CLI::PositiveNumber);

  uda::GradCheckSuiteOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  grad->add_option("--seed", gc.seed, "Random seed");
  grad->add_option("--instances", gc.instances, "Random instances per case");

  std::string spec_path, gen_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic source/target pair as csv");
  gen->add_option("--spec", spec_path, "Shift spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output path; _source and _target are appended to the stem")
      ->required();

  std::string ckpt, src_csv, tgt_csv, embed_out, label_column = "label";
  auto* embed = app.add_subcommand("embed", "PCA-2 embedding of two csv domains through a checkpoint");
  embed->add_option("checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  embed->add_option("source", src_csv, "Source csv")->required()->check(CLI::ExistingFile);
  embed->add_option("target", tgt_csv, "Target csv")->required()->check(CLI::ExistingFile);
  embed->add_option("--out", embed_out, "Output csv")->required();
  embed->add_option("--label-column", label_column, "Label column; empty for unlabeled data");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, workers);
    if (*grad) return cmd_gradcheck(gc);
    if (*gen) return cmd_gen(spec_path, gen_out);
    if (*embed) return cmd_embed(ckpt, src_csv, tgt_csv, embed_out, label_column);
  } catch (const uda::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
