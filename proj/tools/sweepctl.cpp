#include "sweepmp/cli.hpp"

int main(int argc, char** argv) { return sweepmp::run_main(argc, argv); }
