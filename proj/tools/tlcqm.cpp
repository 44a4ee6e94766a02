#include "tlcqm/cli.hpp"

int main(int argc, char** argv) { return tlcqm::run_cli(argc, argv); }
