#include "cli.hpp"

int main(int argc, char** argv) {
    return sope::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
