#include "ise/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ise::cli::main(argc, argv, std::cout, std::cerr); }
