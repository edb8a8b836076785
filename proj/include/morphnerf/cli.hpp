#pragma once

#include <string>
#include <vector>

namespace mnrf::cli {

/// Entry point behind the binary. Subcommands: gen-data, train, fit, render,
/// edit, eval. Exit codes: 0 success, 1 usage error, 2 data/format error,
/// 3 numerical divergence.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace mnrf::cli
