#include <iostream>

#include "trust/cli.hpp"

int main(int argc, char** argv) { return trust::run_cli(argc, argv, std::cout, std::cerr); }
