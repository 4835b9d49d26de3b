#include <iostream>

#include "din/cli.hpp"

int main(int argc, char** argv) { return din::cli::run(argc, argv, std::cout, std::cerr); }
