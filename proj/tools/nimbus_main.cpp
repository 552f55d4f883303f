#include "nimbus/cli.hpp"

int main(int argc, char** argv) { return nimbus::run_cli(argc, argv); }
