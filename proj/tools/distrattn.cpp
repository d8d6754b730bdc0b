// distrattn: command-line driver for the attention engine, block-size planner,
// and error/benchmark harnesses.

#include <CLI11.hpp>

#include <iostream>

#include "distr/commands.hpp"
#include "distr/errors.hpp"
#include "distr/parallel.hpp"

namespace cli = distr::cli;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << "error: " << kind << ": " << one_line(message) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DistrAttention engine, planner and benchmark kit"};
  app.require_subcommand(1);
  const std::size_t env_workers = distr::default_workers(1);

  // gen
  cli::GenOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate seeded Q, K, V tensors (DTNS)");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--n", gen.n, "Sequence length N")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--d", gen.d, "Head dimension d")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--heads", gen.heads, "Number of heads")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  // run
  cli::RunOptions run;
  run.workers = env_workers;
  std::string run_backend = "blocked-exact";
  std::string run_in, run_out, run_report;
  float run_scale = 0.0f;
  auto* run_cmd = app.add_subcommand("run", "Run attention over DTNS inputs");
  run_cmd->add_option("--backend", run_backend, "naive | blocked-exact | distr")
      ->check(CLI::IsMember({"naive", "blocked-exact", "distr"}));
  run_cmd->add_option("--l", run.attention.l, "Q-block rows")->check(CLI::PositiveNumber);
  run_cmd->add_option("--m", run.attention.m, "K/V-block rows")->check(CLI::PositiveNumber);
  run_cmd->add_option("--gstar", run.attention.group_size, "Group size G*")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--hash-width", run.attention.hash_width, "LSH hash width N'");
  auto* scale_opt = run_cmd->add_option("--scale", run_scale, "Score scale (default 1/sqrt(d))");
  run_cmd->add_flag("--causal", run.attention.causal, "Apply a causal mask");
  run_cmd->add_option("--seed", run.attention.seed, "Projection seed");
  run_cmd->add_option("--workers", run.workers, "Worker threads (default $DISTRATTN_WORKERS)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--in", run_in, "Directory with q.dtns, k.dtns, v.dtns")->required();
  run_cmd->add_option("--out", run_out, "Output O tensor path")->required();
  run_cmd->add_option("--report", run_report, "Manifest JSON path")->required();

  // replay
  std::string replay_manifest, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify its checksum");
  replay_cmd->add_option("--manifest", replay_manifest, "Manifest JSON")->required();
  replay_cmd->add_option("--out", replay_out, "Output O tensor path")->required();

  // plan
  cli::PlanOptions plan;
  std::string plan_hw, plan_table;
  auto* plan_cmd = app.add_subcommand("plan", "Select (l, m) for a head dimension");
  plan_cmd->add_option("--d", plan.d, "Head dimension d")->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("--n", plan.n, "Sequence length for the I/O cost column")
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--hw", plan_hw, "Hardware descriptor JSON");
  plan_cmd->add_option("--table", plan_table, "Write the feasibility table CSV here");

  // calibrate
  std::string calib_hw;
  auto* calib_cmd =
      app.add_subcommand("calibrate", "Search descriptor constants against published selections");
  calib_cmd->add_option("--hw", calib_hw, "Base hardware descriptor JSON");

  // errors
  cli::ErrorsOptions errors;
  errors.study.workers = env_workers;
  std::string errors_report, errors_heatmap;
  auto* errors_cmd = app.add_subcommand("errors", "Score-matrix error study on U(0,1) inputs");
  errors_cmd->add_option("--n", errors.study.n, "N")->check(CLI::PositiveNumber);
  errors_cmd->add_option("--d", errors.study.d, "d")->check(CLI::PositiveNumber);
  errors_cmd->add_option("--l", errors.study.l, "Q-block rows")->check(CLI::PositiveNumber);
  errors_cmd->add_option("--gstar", errors.study.group_size, "G*")->check(CLI::PositiveNumber);
  errors_cmd->add_option("--trials", errors.study.trials, "Trials")->check(CLI::PositiveNumber);
  errors_cmd->add_option("--seed", errors.study.seed, "Seed");
  errors_cmd->add_option("--hash-width", errors.study.hash_width, "LSH hash width N'");
  errors_cmd->add_option("--workers", errors.study.workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  errors_cmd->add_option("--report", errors_report, "ErrorReport JSON path")->required();
  errors_cmd->add_option("--heatmap", errors_heatmap, "Trial-0 |S - S_hat| CSV path");

  // bench
  cli::BenchOptions bench;
  bench.workers = env_workers;
  std::string bench_report, bench_csv_path;
  bool bench_no_exact = false;
  auto* bench_cmd = app.add_subcommand("bench", "Time exact vs distr over a sweep of N and G*");
  bench_cmd->add_option("--n-sweep", bench.n_sweep, "Comma-separated N values")->delimiter(',');
  bench_cmd->add_option("--d", bench.d, "d")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--gstar-sweep", bench.gstar_sweep, "Comma-separated G* values")
      ->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "Repeats per point")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--l", bench.l, "Q-block rows")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--m", bench.m, "K/V-block rows")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--workers", bench.workers, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Seed");
  bench_cmd->add_flag("--no-exact", bench_no_exact, "Skip the blocked-exact baseline");
  bench_cmd->add_option("--report", bench_report, "JSON report path")->required();
  bench_cmd->add_option("--csv", bench_csv_path, "CSV table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(cli::kUsage, "usage", e.what());
  }

  try {
    if (*gen_cmd) {
      gen.out_dir = gen_out;
      const auto files = cli::cmd_gen(gen);
      std::cout << files.q.string() << "\n" << files.k.string() << "\n" << files.v.string() << "\n";
    } else if (*run_cmd) {
      run.attention.backend = distr::parse_backend(run_backend);
      if (*scale_opt) run.attention.scale = run_scale;
      run.in_dir = run_in;
      run.out = run_out;
      run.report = run_report;
      cli::cmd_run(run);
    } else if (*replay_cmd) {
      if (!cli::cmd_replay(replay_manifest, replay_out)) {
        return fail(cli::kPrecondition, "mismatch", "replayed output checksum differs");
      }
      std::cout << "checksum match\n";
    } else if (*plan_cmd) {
      if (!plan_hw.empty()) plan.hw = plan_hw;
      if (!plan_table.empty()) plan.table = plan_table;
      const auto result = cli::cmd_plan(plan);
      std::cout << result.selection.l << "," << result.selection.m << "\n";
    } else if (*calib_cmd) {
      std::optional<std::filesystem::path> hw;
      if (!calib_hw.empty()) hw = calib_hw;
      std::cout << cli::cmd_calibrate(hw);
    } else if (*errors_cmd) {
      errors.report = errors_report;
      if (!errors_heatmap.empty()) errors.heatmap = errors_heatmap;
      const auto r = cli::cmd_errors(errors);
      std::cout << "min_pct=" << r.min_pct << " max_pct=" << r.max_pct
                << " mean_pct=" << r.mean_pct << "\n";
    } else if (*bench_cmd) {
      bench.include_exact = !bench_no_exact;
      bench.report = bench_report;
      if (!bench_csv_path.empty()) bench.csv = bench_csv_path;
      std::cout << cli::bench_csv(cli::cmd_bench(bench));
    }
  } catch (const distr::InfeasibleError& e) {
    return fail(cli::kPrecondition, "infeasible[" + e.constraint() + "]", e.what());
  } catch (const distr::IoError& e) {
    return fail(cli::kIo, "io", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(cli::kPrecondition, "precondition", e.what());
  } catch (const std::exception& e) {
    return fail(cli::kIo, "internal", e.what());
  }
  return cli::kOk;
}
