#include "priming/cli.hpp"

int main(int argc, char** argv) { return priming::cli_main(argc, argv); }
