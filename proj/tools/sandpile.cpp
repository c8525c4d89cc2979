#include "sandpile/cli.hpp"

int main(int argc, char** argv) { return sandpile::cli_main(argc, argv); }
