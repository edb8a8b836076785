#include "morphnerf/cli.hpp"

int main(int argc, char** argv) { return mnrf::cli::run(argc, argv); }
