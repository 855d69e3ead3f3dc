#include <iostream>
#include <string>
#include <vector>

#include "chaos_stein/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return chaos_stein::cli::run(args, std::cout, std::cerr);
}
