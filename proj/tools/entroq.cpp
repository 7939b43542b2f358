#include "entroq/cli.hpp"

int main(int argc, char** argv) { return entroq::cli_main(argc, argv); }
