#include <iostream>

#include "aerialnav/cli.hpp"

int main(int argc, char** argv) { return aerialnav::run_cli(argc, argv, std::cout, std::cerr); }
