#include <iostream>

#include "fscp/harness/cli.hpp"

int main(int argc, char** argv) {
  return fscp::harness::run_cli(argc, argv, std::cout, std::cerr);
}
