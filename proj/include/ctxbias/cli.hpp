#pragma once

#include <string>
#include <vector>

namespace ctxbias {

// Entry point behind the ctxbias binary. Returns the process exit code:
// 0 success, 1 usage error, 2 data/invariant error.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace ctxbias
