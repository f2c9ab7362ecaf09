#include <iostream>
#include <string>
#include <vector>

#include "mortjump/cli.hpp"
#include "mortjump/error.hpp"

int main(int argc, char** argv) {
    mortjump::CliEnvironment env;
    try {
        env = mortjump::environment_from_process();
    } catch (const mortjump::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mortjump::kExitUsage;
    }
    return mortjump::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr,
                             env);
}
