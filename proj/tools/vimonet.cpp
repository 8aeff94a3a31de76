#include "vimonet/cli.hpp"

int main(int argc, char** argv) { return vimonet::cli::run(argc, argv); }
