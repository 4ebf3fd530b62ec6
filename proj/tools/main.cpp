#include "dcmcl/cli.hpp"

int main(int argc, char** argv) { return dcmcl::run(argc, argv); }
