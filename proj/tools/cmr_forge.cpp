#include <iostream>

#include "cmr/cli.hpp"

int main(int argc, char **argv) {
  return cmr::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
