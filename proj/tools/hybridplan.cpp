#include "hybridplan/cli.hpp"

int main(int argc, char** argv) { return hybridplan::cli::run(argc, argv); }
