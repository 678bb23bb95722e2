#include <iostream>
#include <string>
#include <vector>

#include "ssdl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ssdl::cli::dispatch(args, std::cout, std::cerr);
}
