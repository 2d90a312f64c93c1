#include "surveycalib/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return surveycalib::run_cli(argc, argv, std::cout, std::cerr); }
