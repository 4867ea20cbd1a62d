#include "anlg/harness.hpp"

int main(int argc, char** argv) { return anlg::harness::run_cli(argc, argv); }
