#include <iostream>

#include "lowbit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lowbit::run_cli(args, std::cout, std::cerr);
}
