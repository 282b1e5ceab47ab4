#include "rbsde/harness.hpp"

int main(int argc, char** argv) { return rbsde::cli_main(argc, argv); }
