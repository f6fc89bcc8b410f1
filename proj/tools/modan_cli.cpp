#include <iostream>
#include <string>
#include <vector>

#include "modan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return modan::cli_dispatch(args, std::cout, std::cerr);
}
