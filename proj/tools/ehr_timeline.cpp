#include <iostream>

#include "ehrtl/cli.hpp"

int main(int argc, char** argv) {
    return ehrtl::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
