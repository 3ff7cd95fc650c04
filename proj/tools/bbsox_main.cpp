#include <iostream>
#include <string>
#include <vector>

#include "bbsox/cli_app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bbsox::cli_main(args, std::cout, std::cerr);
}
