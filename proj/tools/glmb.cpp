#include "glmb/cli.hpp"

int main(int argc, char** argv) {
    return glmb::cli::main_entry(argc, argv);
}
