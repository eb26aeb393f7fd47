#include "thinhomog/cli.hpp"

int main(int argc, char** argv) { return thinhomog::run_cli(argc, argv); }
