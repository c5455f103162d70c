#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace odlc::cli {

// Set by SIGINT/SIGTERM; long-running subcommands return once it is true.
std::atomic<bool>& stop_flag();

// Runs one command line (args[0] is the program name). Machine-readable
// output goes to `out`, human summaries and errors to `err`. Returns 0 on
// success, 1 on domain errors (one {"error", "message"} object on `err`) and
// 2 on usage errors.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace odlc::cli
