#include "tdkps/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return tdkps::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
