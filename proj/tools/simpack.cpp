#include "simpack/cli.hpp"

int main(int argc, char** argv) { return simpack::run_cli(argc, argv); }
