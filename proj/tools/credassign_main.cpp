#include "credassign/cli.hpp"

int main(int argc, char** argv) { return credassign::cli_main(argc, argv); }
