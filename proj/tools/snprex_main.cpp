#include "snprex/cli.hpp"

int main(int argc, char** argv) { return snprex::run_command(argc, argv); }
