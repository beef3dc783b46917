#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ltoda {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_validation = 1,
    exit_domain = 2,
    exit_parse = 3,
    exit_blowup = 4,
};

/// Runs one command; args exclude the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ltoda
