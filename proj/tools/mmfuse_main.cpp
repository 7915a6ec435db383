#include "mmfuse/cli.hpp"

int main(int argc, char** argv) { return mmfuse::cli_main(argc, argv); }
