#include "bracketflow/cli.hpp"

int main(int argc, char** argv) { return bracketflow::run_cli(argc, argv); }
