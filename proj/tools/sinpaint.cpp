#include <iostream>

#include "sinpaint/cli/run_config.hpp"

int main(int argc, char** argv) { return sinpaint::cli::run(argc, argv, std::cout, std::cerr); }
