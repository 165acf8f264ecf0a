#include "mcf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mcf::run_cli(argc, argv, std::cout, std::cerr); }
