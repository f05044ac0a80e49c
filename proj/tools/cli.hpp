#pragma once

// Command-line front end. `run` is the whole program; the other functions
// expose the parser for documentation tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace vise::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kCorruptWeights = 5,
  kSpecMismatch = 6,
  kNumerical = 7,
};

struct ExitCodeDoc {
  int code;
  const char* name;
  const char* meaning;
};

const std::vector<ExitCodeDoc>& exit_codes();

/// `env_seed` is the value of VISE_SEED, or null when unset.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const char* env_seed);

std::vector<std::string> subcommands();
/// Help text of the top level ("") or of one subcommand.
std::string help_text(const std::string& subcommand);
/// Every long flag ("--name") and positional name a subcommand accepts.
std::vector<std::string> option_names(const std::string& subcommand);

}  // namespace vise::cli
