#include <iostream>

#include "psychfm/cli.hpp"

int main(int argc, char** argv) { return psychfm::cli::cli_main(argc, argv, std::cout, std::cerr); }
