#include <iostream>
#include <string>
#include <vector>

#include "flmr/experiment/experiment.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return flmr::cli::run_cli(args, std::cout, std::cerr);
}
