#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "qre/cli.hpp"

namespace {

// Round counts are accepted in scientific notation ("1e6") as long as they are integral.
std::optional<qre::u64> integral(const std::optional<double>& x, const char* name) {
  if (!x) return std::nullopt;
  if (!(*x >= 1.0) || std::floor(*x) != *x || *x > 1.8e19)
    throw CLI::ValidationError(name, "must be a positive integer");
  return static_cast<qre::u64>(*x);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextuality-based randomness expansion: protocol simulation and analysis"};
  app.require_subcommand(1);
  int code = qre::cli::kExitOk;

  qre::cli::RunArgs run;
  std::optional<double> run_n;
  auto* c_run = app.add_subcommand("run", "simulate one protocol instance");
  c_run->add_option("--config", run.config, "protocol config JSON")->check(CLI::ExistingFile);
  c_run->add_option("--strategy", run.strategy, "device strategy JSON (default: ideal strategy)")->check(CLI::ExistingFile);
  c_run->add_option("--seed", run.seed, "seed of the bit source");
  c_run->add_option("--n", run_n, "number of rounds");
  c_run->add_option("--N", run.N, "cycle size");
  c_run->add_option("--q", run.q, "spot-check probability");
  c_run->add_option("--epsilon", run.epsilon, "abort tolerance (odd cycles)");
  c_run->add_option("--even-tolerance", run.even_tolerance, "abort tolerance (even cycles)");
  c_run->add_option("--parity", run.parity, "odd or even")->check(CLI::IsMember({"odd", "even"}));
  c_run->add_option("--omega-convention", run.omega_convention, "even-cycle post-selection convention")
      ->check(CLI::IsMember({"marginal-derived", "paper-fig3", "paper-appD-text"}));
  c_run->add_option("--out", run.out, "report JSON path (default stdout)");
  c_run->add_option("--round-log", run.round_log, "per-round CSV path");
  c_run->add_option("--threads", run.threads, "worker threads")->check(CLI::Range(1u, 256u));
  c_run->callback([&] {
    run.n = integral(run_n, "--n");
    code = qre::cli::cmd_run(run, std::cout, std::cerr);
  });

  qre::cli::VerifyArgs verify;
  std::optional<double> verify_samples;
  auto* c_verify = app.add_subcommand("verify", "check repeatability and no-disturbance of a strategy");
  c_verify->add_option("--config", verify.config, "protocol config JSON")->check(CLI::ExistingFile);
  c_verify->add_option("--strategy", verify.strategy, "device strategy JSON")->check(CLI::ExistingFile);
  c_verify->add_option("--N", verify.N, "cycle size for the ideal strategy");
  c_verify->add_option("--parity", verify.parity, "odd or even")->check(CLI::IsMember({"odd", "even"}));
  c_verify->add_option("--samples", verify_samples, "simulated trials per instrument");
  c_verify->add_option("--seed", verify.seed, "diagnostic seed");
  c_verify->add_option("--out", verify.out, "output JSON path (default stdout)");
  c_verify->callback([&] {
    if (auto s = integral(verify_samples, "--samples")) verify.samples = *s;
    code = qre::cli::cmd_verify(verify, std::cout, std::cerr);
  });

  qre::cli::RateTableArgs table;
  auto* c_table = app.add_subcommand("rate-table", "expected output, input and net rate");
  c_table->add_option("--n", table.n_values, "round counts");
  c_table->add_option("--N", table.Ns, "cycle sizes");
  c_table->add_option("--q", table.q, "spot-check probability (default 1/sqrt(n))");
  c_table->add_option("--parity", table.parity, "override parity")->check(CLI::IsMember({"odd", "even"}));
  c_table->add_option("--omega-convention", table.omega_convention, "even-cycle post-selection convention")
      ->check(CLI::IsMember({"marginal-derived", "paper-fig3", "paper-appD-text"}));
  c_table->add_option("--out", table.out, "CSV path (default stdout)");
  c_table->callback([&] { code = qre::cli::cmd_rate_table(table, std::cout, std::cerr); });

  qre::cli::Fig2Args fig2;
  auto* c_fig2 = app.add_subcommand("fig2", "odd-cycle rate against n with q = 1/sqrt(n)");
  c_fig2->add_option("--n", fig2.n_values, "round counts (default 1e2..1e10)");
  c_fig2->add_option("--N", fig2.Ns, "odd cycle sizes (default 5 7 9)");
  c_fig2->add_option("--out", fig2.out, "CSV path (default stdout)");
  c_fig2->callback([&] { code = qre::cli::cmd_fig2(fig2, std::cout, std::cerr); });

  qre::cli::Fig4Args fig4;
  auto* c_fig4 = app.add_subcommand("fig4", "even-cycle rate against N");
  c_fig4->add_option("--n", fig4.n, "round count");
  c_fig4->add_option("--q", fig4.q, "spot-check probability (default 1/sqrt(n))");
  c_fig4->add_option("--N-min", fig4.N_min, "smallest even N");
  c_fig4->add_option("--N-max", fig4.N_max, "largest even N");
  c_fig4->add_option("--omega-convention", fig4.omega_convention, "post-selection convention")
      ->check(CLI::IsMember({"marginal-derived", "paper-fig3", "paper-appD-text"}));
  c_fig4->add_option("--out", fig4.out, "CSV path (default stdout)");
  c_fig4->callback([&] { code = qre::cli::cmd_fig4(fig4, std::cout, std::cerr); });

  qre::cli::SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("security-sweep", "trace distance of the key against inequality deficit");
  c_sweep->add_option("--N", sweep.N, "odd cycle size");
  c_sweep->add_option("--model", sweep.model, "Eve model")->check(CLI::IsMember({"correlated", "product"}));
  c_sweep->add_option("--eps-min", sweep.eps_min, "smallest deficit");
  c_sweep->add_option("--eps-max", sweep.eps_max, "largest deficit");
  c_sweep->add_option("--points", sweep.points, "grid points");
  c_sweep->add_option("--out", sweep.out, "CSV path (default stdout)");
  c_sweep->add_option("--fit-out", sweep.sidecar, "fit JSON path (default: beside --out)");
  c_sweep->callback([&] { code = qre::cli::cmd_security_sweep(sweep, std::cout, std::cerr); });

  qre::cli::KcbsArgs kcbs;
  auto* c_kcbs = app.add_subcommand("kcbs", "expansion feasibility for an observed KCBS value");
  c_kcbs->add_option("--beta", kcbs.beta, "observed KCBS value");
  c_kcbs->add_option("--n", kcbs.n, "round count");
  c_kcbs->add_option("--out", kcbs.out, "output JSON path (default stdout)");
  c_kcbs->callback([&] { code = qre::cli::cmd_kcbs(kcbs, std::cout, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : qre::cli::kExitError;
  }
  return code;
}
