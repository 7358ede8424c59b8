#include "gaan/cli.hpp"

int main(int argc, char** argv) { return gaan::cli::run(argc, argv); }
