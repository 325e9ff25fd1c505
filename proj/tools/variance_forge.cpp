#include "vforge/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return vforge::run_cli(argc, argv, std::cout, std::cerr);
}
