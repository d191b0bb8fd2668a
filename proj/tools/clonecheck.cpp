#include "clonecheck/cli.hpp"

int main(int argc, char** argv) { return clonecheck::run_cli(argc, argv); }
