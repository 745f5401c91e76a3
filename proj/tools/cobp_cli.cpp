#include "cli.hpp"

int main(int argc, char** argv) { return qcs::cli::dispatch(argc, argv); }
