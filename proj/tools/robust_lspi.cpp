#include "rrl/cli.hpp"

int main(int argc, char** argv) { return rrl::cli_entry(argc, argv); }
