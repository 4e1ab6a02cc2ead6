#include "hflag/cli.hpp"

int main(int argc, char** argv) { return hflag::cli::main(argc, argv); }
