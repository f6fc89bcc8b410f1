#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace modan {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (`args` excludes the program name). Subcommands:
/// synth, cap, pretrain, finetune, probe, evaluate, project.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modan
