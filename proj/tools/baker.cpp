#include "baker/cli.hpp"

int main(int argc, char** argv) { return baker::cli_main(argc, argv); }
