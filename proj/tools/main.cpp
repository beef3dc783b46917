#include <iostream>

#include "ltoda/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ltoda::run_cli(args, std::cout, std::cerr);
}
