#include "mscbo/cli.hpp"

int main(int argc, char** argv) { return mscbo::run_cli(argc, argv); }
