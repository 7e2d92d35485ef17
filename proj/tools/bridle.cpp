#include <iostream>

#include "bridle_cli.hpp"

int main(int argc, char** argv) { return bridle::cli::dispatch(argc, argv, std::cout, std::cerr); }
