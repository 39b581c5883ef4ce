#include <iostream>

#include "simura/cli.hpp"

int main(int argc, char** argv) {
  return simura::run_cli(argc, argv, std::cout, std::cerr);
}
