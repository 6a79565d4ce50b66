#include "dcnet/cli.hpp"

int main(int argc, char** argv) { return dcnet::cli::run(argc, argv); }
