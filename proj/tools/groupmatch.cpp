#include <iostream>

#include "groupmatch/cli.hpp"

int main(int argc, char** argv) { return groupmatch::run_cli(argc, argv, std::cout, std::cerr); }
