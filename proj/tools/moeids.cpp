#include "moeids/cli/cli.hpp"

int main(int argc, char** argv) { return moeids::cli::run_cli(argc, argv); }
