#include <iostream>

#include "oar/cli/app.hpp"

int main(int argc, char** argv) { return oar::cli::run_cli(argc, argv, std::cout, std::cerr); }
