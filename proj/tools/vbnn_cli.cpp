#include "vbnn/cli.hpp"

int main(int argc, char** argv) { return vbnn::run_cli(argc, argv); }
