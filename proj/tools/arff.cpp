#include <iostream>

#include "arff/cli.hpp"

int main(int argc, char** argv) { return arff::cli::main_entry(argc, argv, std::cout, std::cerr); }
