#include "iupf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return iupf::cli::dispatch(argc, argv, std::cout, std::cerr); }
