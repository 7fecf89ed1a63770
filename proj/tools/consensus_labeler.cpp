#include <consensus_labeler/cli.hpp>

int main(int argc, char** argv) { return consensus::cli::main(argc, argv); }
