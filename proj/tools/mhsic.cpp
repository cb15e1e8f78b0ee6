#include <iostream>
#include <string>
#include <vector>

#include "mhsic/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return mhsic::cli::run(args, std::cout, std::cerr);
}
