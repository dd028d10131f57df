#include <iostream>

#include "gtring/commands.hpp"

int main(int argc, char** argv) { return gtring::run_cli(argc, argv, std::cout, std::cerr); }
