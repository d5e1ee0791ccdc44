#include "noarb/runner.hpp"

#include <iostream>

int main(int argc, char** argv) { return noarb::run_cli(argc, argv, std::cout, std::cerr); }
