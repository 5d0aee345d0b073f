#include <iostream>

#include "towerlab/cli/commands.hpp"

int main(int argc, char** argv) { return towerlab::cli::run(argc, argv, std::cout, std::cerr); }
