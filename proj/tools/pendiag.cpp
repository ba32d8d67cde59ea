#include <string>
#include <vector>

#include "pendiag/cli.hpp"

int main(int argc, char** argv) {
    return pendiag::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
