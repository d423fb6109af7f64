#include "escp/cli.hpp"

int main(int argc, char** argv) { return escp::cli::run(argc, argv); }
