#include "mofa/cli.h"

int main(int argc, char** argv) { return mofa::cli_main(argc, argv); }
