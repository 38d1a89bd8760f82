#include <string>
#include <vector>

#include "ventgate/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ventgate::cli_main(args);
}
