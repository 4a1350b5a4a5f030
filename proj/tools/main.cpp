#include <string>
#include <vector>

#include "aspectkg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return aspectkg::cli::cli_dispatch(args);
}
