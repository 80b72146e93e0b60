#include <string>
#include <vector>

#include "irgs/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return irgs::cli::run(args);
}
