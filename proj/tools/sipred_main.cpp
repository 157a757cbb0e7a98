#include <iostream>

#include "sipred/cli.hpp"

int main(int argc, char** argv) { return sipred::cli::main(argc, argv, std::cout, std::cerr); }
