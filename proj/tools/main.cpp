#include "hmrf_icp/cli.hpp"

int main(int argc, char** argv) { return hmrf_icp::cli_main(argc, argv); }
