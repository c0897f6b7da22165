#include "chn/cli.hpp"

int main(int argc, char** argv) { return chn::run(argc, argv); }
