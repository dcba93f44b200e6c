#include <string>
#include <vector>

#include "riskpool/cli.hpp"

int main(int argc, char** argv) {
    return riskpool::cli::run(std::vector<std::string>(argv, argv + argc));
}
