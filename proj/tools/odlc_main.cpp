#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "odlc/cli/cli.hpp"

namespace {

void on_signal(int) { odlc::cli::stop_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv, argv + argc);
  return odlc::cli::dispatch(args, std::cin, std::cout, std::cerr);
}
