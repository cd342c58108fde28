#include <iostream>

#include "affcue/cli.hpp"

int main(int argc, char** argv) { return affcue::cli_main(argc, argv, std::cout, std::cerr); }
