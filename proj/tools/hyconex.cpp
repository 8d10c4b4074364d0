#include <iostream>

#include "hyconex/cli.hpp"

int main(int argc, char** argv) { return hcx::run_cli(argc, argv, std::cout, std::cerr); }
