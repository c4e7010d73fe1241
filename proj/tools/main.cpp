#include "polbc/cli.hpp"

int main(int argc, char** argv) { return polbc::cli_main(argc, argv); }
