#include "gsd/cli.hpp"

int main(int argc, char** argv) { return gsd::cli::run(argc, argv); }
