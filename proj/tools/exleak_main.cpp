#include <iostream>

#include "exleak/cli.hpp"

int main(int argc, char** argv) { return exleak::run_cli(argc, argv, std::cout, std::cerr); }
