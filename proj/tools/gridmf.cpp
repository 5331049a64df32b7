#include "gridmf/cli.hpp"

int main(int argc, char** argv) { return gridmf::cli_main(argc, argv); }
