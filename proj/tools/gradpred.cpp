#include "gradpred/cli.hpp"

int main(int argc, char** argv) { return gradpred::cli::run(argc, argv); }
