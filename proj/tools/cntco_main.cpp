#include "cntco/workbench.hpp"

#include <iostream>

int main(int argc, char** argv) { return cntco::run_cli(argc, argv, std::cout, std::cerr); }
