#include <iostream>
#include <string>
#include <vector>

#include "codriver/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return codriver::cli::run(args, std::cout, std::cerr);
}
