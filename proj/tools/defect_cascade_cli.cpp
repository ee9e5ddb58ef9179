#include "defect_cascade/cli_io.hpp"

int main(int argc, char** argv) { return defect_cascade::run_cli(argc, argv); }
