#include <iostream>

#include "copos/cli.hpp"

int main(int argc, char** argv) { return copos::cli::run(argc, argv, std::cout, std::cerr); }
