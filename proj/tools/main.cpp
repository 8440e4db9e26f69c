#include "hvis/cli.hpp"

int main(int argc, char** argv) { return hvis::cli::run(argc, argv); }
