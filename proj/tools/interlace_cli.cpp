// interlace: command-line driver for the simulation experiments.
//
//   interlace <subcommand> [--config FILE] [--seed N] [--out DIR] [--replicas N]
//             [--mode shared|adjacent] [--d N] [--u X] [--limit N] [--threads N]
//
// Tables go to DIR/<name>.csv, or to stdout without --out. Failures print one
// JSON object {"error", "message", "field"} to stderr and exit nonzero:
// 2 for bad input, 3 for an exhausted budget, 1 otherwise.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "interlace/harness/config.hpp"
#include "interlace/harness/experiments.hpp"

namespace {

using namespace interlace;
using namespace interlace::harness;

struct Common {
  std::optional<std::string> config, out;
  CliOverrides cli;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "output directory (tables to stdout when absent)");
  app->add_option("--seed", c.cli.seed, "master seed (overrides config and INTERLACE_SEED)");
  app->add_option("--replicas", c.cli.replicas, "number of replicas");
  app->add_option("--mode", c.cli.mode, "adjacency: shared or adjacent");
  app->add_option("--d", c.cli.d, "dimension");
  app->add_option("--u", c.cli.u, "intensity");
  app->add_option("--limit", c.cli.limit, "min-connect search limit");
  app->add_option("--threads", c.cli.threads, "worker threads");
}

int fail(const std::string& kind, const std::string& message, const std::string& field, int code) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"field", field.empty() ? nlohmann::json() : nlohmann::json(field)}};
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random interlacements simulation lab"};
  app.require_subcommand(1);
  Common common;
  std::optional<std::string> replay;

  auto* cap = app.add_subcommand("capacity", "capacity of finite sets");
  auto* sample = app.add_subcommand("sample", "sample the process on a window (JSONL)");
  auto* connect = app.add_subcommand("connect", "min-connect statistics for marked points");
  auto* cascade = app.add_subcommand("cascade", "capacity of cascade sets against R");
  auto* tree = app.add_subcommand("tree-sum", "weighted tree sums");
  auto* nkd = app.add_subcommand("verify-nkd", "table of n(k,d)");
  auto* schemes = app.add_subcommand("schemes", "enumerate schemes (JSON)");
  for (auto* s : {cap, sample, connect, cascade, tree, nkd, schemes}) add_common(s, common);
  connect->add_option("--replay", replay, "recompute min-connect from a persisted samples file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), "", 2);
  }

  try {
    const auto cfg = load_config(common.config, common.cli);
    Output out;
    if (common.out) out.dir = *common.out;
    out.stream = &std::cout;

    if (*cap) {
      out.emit(run_capacity(cfg), cfg);
    } else if (*sample) {
      Output tables = out;
      if (!out.dir) tables.stream = nullptr;  // stdout carries the samples
      tables.emit(run_sample(cfg, out, &std::cout), cfg);
    } else if (*connect) {
      if (replay) {
        std::ifstream in(*replay);
        if (!in) throw ConfigError("--replay", "cannot open " + *replay);
        out.emit(replay_connectivity(cfg, in), cfg);
      } else {
        run_connectivity(cfg, out);
      }
    } else if (*cascade) {
      run_cascade(cfg, out);
    } else if (*tree) {
      run_tree_sum(cfg, out);
    } else if (*nkd) {
      run_verify_nkd(cfg, out);
    } else if (*schemes) {
      Output tables = out;
      if (!out.dir) tables.stream = nullptr;
      const auto j = run_schemes(cfg, tables);
      if (!out.dir) std::cout << j.dump(2) << "\n";
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.field(), 2);
  } catch (const BudgetError& e) {
    return fail("budget", e.what(), "", 3);
  } catch (const ContractError& e) {
    return fail("contract", e.what(), "", 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), "", 1);
  }
  return 0;
}
