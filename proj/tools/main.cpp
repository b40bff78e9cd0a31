#include "levsim/cli.hpp"
int main(int argc, char** argv) { return levsim::cli_main(argc, argv); }
