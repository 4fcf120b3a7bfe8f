#include "supgauss/cli.hpp"

int main(int argc, char** argv) { return supgauss::cli::main(argc, argv); }
