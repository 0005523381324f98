#include <iostream>
#include <string>
#include <vector>

#include "autoj/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return autoj::run_cli(args, std::cout, std::cerr);
}
