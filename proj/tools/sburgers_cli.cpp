#include <string>
#include <vector>

#include "sburgers/cli_app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sburgers::cli::run(std::move(args));
}
