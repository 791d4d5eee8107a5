#include "tlbench/cli.hpp"

int main(int argc, char** argv) { return tlbench::run_cli(argc, argv); }
