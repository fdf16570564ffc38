#include <iostream>

#include "hsa/cli.hpp"

int main(int argc, char** argv) { return hsa::cli_main(argc, argv, std::cout, std::cerr); }
