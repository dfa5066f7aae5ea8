#include <iostream>
#include <string>
#include <vector>

#include "muplab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return muplab::run_cli(args, std::cout, std::cerr);
}
