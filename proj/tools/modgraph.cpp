#include "modgraph/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return modgraph::cli::run(argc, argv, std::cout, std::cerr);
}
