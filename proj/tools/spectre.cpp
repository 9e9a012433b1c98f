#include "spectre/cli.hpp"

int main(int argc, char** argv) { return spectre::run_cli(argc, argv); }
