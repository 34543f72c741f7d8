#include <iostream>

#include "progviz/cli.hpp"

int main(int argc, char** argv) { return progviz::cli::main(argc, argv, std::cout, std::cerr); }
