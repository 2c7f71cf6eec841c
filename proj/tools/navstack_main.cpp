#include "navstack/harness.hpp"

int main(int argc, char** argv) { return navstack::harness::run_cli(argc, argv); }
