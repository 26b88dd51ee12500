#include <cstdlib>
#include <iostream>

#include "ikea/cli.hpp"

int main(int argc, char** argv) {
  return ikea::run_cli(argc, argv, std::cout, std::cerr, [](const char* name) { return std::getenv(name); });
}
