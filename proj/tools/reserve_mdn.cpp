#include "reserve_mdn/cli.hpp"

int main(int argc, char** argv) { return rmdn::cli::main(argc, argv); }
