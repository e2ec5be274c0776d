#include "rtsf/cli/commands.hpp"

int main(int argc, char** argv) { return rtsf::cli::run(argc, argv); }
