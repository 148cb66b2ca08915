#include <iostream>

#include "evote/cli.hpp"

int main(int argc, char** argv) {
  return evote::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
