#include "cli.hpp"

int main(int argc, char** argv) { return livorlab::cli::run(argc, argv); }
