#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ccc::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Runs one command line (without the program name), e.g.
// {"fit", "--data", "d", "--config", "c.ini", "--out", "o"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ccc::cli
