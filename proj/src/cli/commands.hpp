// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace rewritelab::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
  /// Full argument list (program name excluded), recorded in run.json.
  std::vector<std::string> argv;
  /// Set by the selected subcommand; run after parsing succeeds.
  std::function<int()> action;
};

void add_gen_commands(CLI::App& app, Context& ctx);
void add_markov_commands(CLI::App& app, Context& ctx);
void add_stats_command(CLI::App& app, Context& ctx);
void add_model_commands(CLI::App& app, Context& ctx);
void add_preset_commands(CLI::App& app, Context& ctx);
void add_replay_command(CLI::App& app, Context& ctx);

}  // namespace rewritelab::cli
