#include "cli.hpp"

int main(int argc, char** argv) { return homoglab::cli::run(argc, argv); }
