#include "synthset/cli.hpp"

int main(int argc, char** argv) { return synthset::run_cli(argc, argv); }
