#include "run_config.hpp"

int main(int argc, char** argv) { return calsens::cli::run_cli(argc, argv); }
