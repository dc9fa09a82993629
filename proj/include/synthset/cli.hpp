#pragma once

#include <string>
#include <vector>

namespace synthset {

/// Runs one subcommand (scrape, mat, select, review, compose, all, validate).
/// Returns 0 on success, 1 on configuration or usage errors, 2 on data errors.
int run_cli(int argc, const char* const* argv);

/// Same as above; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace synthset
