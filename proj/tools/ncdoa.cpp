#include <iostream>

#include "ncdoa/cli.hpp"

int main(int argc, char** argv) {
  return ncdoa::run_cli(argc, argv, std::cout, std::cerr);
}
