// allpass check|complete|lmi|factor|deflate <file> [flags]

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "allpass/cli.hpp"

int main(int argc, char** argv) {
  using allpass::cli::Options;
  Options opt;
  CLI::App app{"Certify, complete, parametrize and factorize discrete-time all-pass functions"};
  app.require_subcommand(1);
  app.fallthrough();

  double tol = 0.0;
  int grid = 0;
  unsigned long long seed = 0;
  auto* tol_opt = app.add_option("--tol", tol, "relative tolerance (default 1e-9, env ALLPASS_TOL)");
  auto* grid_opt = app.add_option("--grid", grid, "unit-circle grid size (default 64)");
  auto* seed_opt = app.add_option("--seed", seed, "seed for off-circle sample points");

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("file", opt.file, "problem file (JSON)")->required();
    return sub;
  };
  auto* check = add("check", "decide the all-pass property and emit the certificate");
  auto* complete = add("complete", "complete partial data to an all-pass realization");
  complete->add_option("--mode", opt.mode, "from-B | from-C | from-BC")
      ->required()
      ->check(CLI::IsMember({"from-B", "from-C", "from-BC"}));
  auto* lmi = add("lmi", "solutions of the rank-constrained LMI");
  lmi->add_option("--side", opt.side, "P | Q")->check(CLI::IsMember({"P", "Q"}));
  lmi->add_flag("--enumerate", opt.enumerate, "one solution per enumerated invariant subspace");
  lmi->add_option("--max-count", opt.max_count, "enumeration limit");
  auto* factor = add("factor", "minimal factorizations into all-pass divisors");
  factor->add_flag("--enumerate", opt.enumerate, "enumerate invariant subspaces");
  factor->add_option("--max-count", opt.max_count, "enumeration limit");
  factor->add_flag("--biproper", opt.biproper, "also emit the closed-form biproper divisors");
  auto* deflate = add("deflate", "split off the delays at infinity");
  (void)check;
  (void)deflate;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return allpass::cli::kInput;
  }
  opt.command = app.get_subcommands().front()->get_name();
  if (tol_opt->count()) opt.tol = tol;
  if (grid_opt->count()) opt.grid = grid;
  if (seed_opt->count()) opt.seed = seed;

  const auto res = allpass::cli::run(opt, std::getenv("ALLPASS_TOL"));
  std::cout << res.envelope.dump(2) + "\n" << std::flush;
  if (!res.message.empty()) std::cerr << "allpass " << opt.command << ": " << res.message << "\n";
  return res.exit_code;
}
