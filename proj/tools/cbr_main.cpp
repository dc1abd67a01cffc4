#include <iostream>

#include "cbr/cli.hpp"

int main(int argc, char** argv) { return cbr::cli::run(argc, argv, std::cout, std::cerr); }
