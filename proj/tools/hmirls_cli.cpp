#include "hmirls/experiments/cli.hpp"

int main(int argc, char** argv) { return hmirls::experiments::run_cli(argc, argv); }
