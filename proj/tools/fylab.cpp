#include "fylab/cli.hpp"

int main(int argc, char** argv) { return fylab::run_cli(argc, argv); }
