#include <iostream>

#include "shiftuq/cli.hpp"

int main(int argc, char** argv) { return shiftuq::cli::run(argc, argv, std::cout, std::cerr); }
