#include "pnl/cli.hpp"

int main(int argc, char** argv) { return pnl::run_cli(argc, argv); }
