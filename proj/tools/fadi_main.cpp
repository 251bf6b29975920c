#include <iostream>

#include "fadi/cli.hpp"

int main(int argc, char** argv) { return fadi::cli_main(argc, argv, std::cout, std::cerr); }
