#include "infocnf/cli.hpp"

int main(int argc, char** argv) { return infocnf::run_cli(argc, argv); }
