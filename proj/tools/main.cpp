#include "cli.hpp"

#include <iostream>

extern char** environ;

int main(int argc, char** argv) { return hsp::run_cli(argc, argv, environ, std::cout, std::cerr); }
