#include "botlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return botlab::cli::run(argc, argv, std::cout, std::cerr); }
