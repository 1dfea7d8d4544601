#include "dpos/cli.hpp"

int main(int argc, char** argv) { return dpos::cli::run_cli(argc, argv); }
