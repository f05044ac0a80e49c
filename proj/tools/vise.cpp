#include "cli.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  return vise::cli::run(argc, argv, std::cout, std::cerr, std::getenv("VISE_SEED"));
}
