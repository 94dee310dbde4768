#include "ccity/cli.hpp"

int main(int argc, char** argv) { return ccity::cli::run(argc, argv); }
