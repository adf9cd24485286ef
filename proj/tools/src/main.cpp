#include "advmal/cli.hpp"

int main(int argc, char** argv) { return advmal::cli::run(argc, argv); }
