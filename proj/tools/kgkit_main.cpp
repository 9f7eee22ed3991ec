#include "kg/cli.hpp"

int main(int argc, char** argv) { return kg::cli_run(argc, argv); }
