#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rerank_search {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitProvider = 3 };

/// Runs the command line (args excludes the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string corpus_path_for(const std::string& index_path);

}  // namespace rerank_search
