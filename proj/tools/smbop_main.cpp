#include "smbop/cli/cli.hpp"

int main(int argc, char** argv) { return smbop::cli::run(argc, argv); }
