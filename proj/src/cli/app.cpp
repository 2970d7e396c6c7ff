// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/cli.hpp"

#include <algorithm>
#include <exception>

#include "commands.hpp"
#include "rewritelab/errors.hpp"

#ifndef REWRITELAB_VERSION
#define REWRITELAB_VERSION "0.0.0"
#endif

namespace rewritelab {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  cli::Context ctx{out, err, args, {}};
  CLI::App app{"Instruction-following generalization lab: rewrite datasets, Markov algorithms, a tiny transformer "
               "and exact-match evaluation",
               "rewritelab"};
  app.set_version_flag("--version", std::string("rewritelab ") + REWRITELAB_VERSION);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  cli::add_gen_commands(app, ctx);
  cli::add_markov_commands(app, ctx);
  cli::add_stats_command(app, ctx);
  cli::add_model_commands(app, ctx);
  cli::add_preset_commands(app, ctx);
  cli::add_replay_command(app, ctx);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    return ctx.action ? ctx.action() : kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UnsatisfiableError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace rewritelab
