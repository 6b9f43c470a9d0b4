#include "nfheat/cli.hpp"

int main(int argc, char** argv) { return nfheat::cli::run(argc, argv); }
