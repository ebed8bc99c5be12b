#include "qarch/cli.hpp"

int main(int argc, char** argv) { return qarch::cli::run(argc, argv); }
