#include <vector>
#include <string>

#include "vibe/config.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vibe::cli::run_cli(args);
}
