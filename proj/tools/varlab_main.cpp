#include "varlab/cli.hpp"

int main(int argc, char** argv) {
    return varlab::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
