#include "cli.hpp"

int main(int argc, char** argv) { return glbi::cli::main(argc, argv); }
