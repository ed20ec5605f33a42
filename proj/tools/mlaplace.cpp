#include "mlap/cli.hpp"

int main(int argc, char** argv) { return mlap::cli_main(argc, argv); }
