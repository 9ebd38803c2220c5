#include <string>
#include <vector>

#include "factoreeg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return factoreeg::cli_main(args);
}
