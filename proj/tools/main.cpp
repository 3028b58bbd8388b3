#include <iostream>

#include "wattbench/cli.hpp"

int main(int argc, char** argv) {
  return wattbench::cli_main(argc, argv, std::cout, std::cerr);
}
