#include <iostream>
#include <string>
#include <vector>

#include "omib/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return omib::run_cli(args, std::cout, std::cerr);
}
