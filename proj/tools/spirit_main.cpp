#include "spirit/cli.hpp"

int main(int argc, char** argv) { return spirit::cli::run(argc, argv); }
