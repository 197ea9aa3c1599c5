#include "radarcrb/cli.hpp"

int main(int argc, char** argv) { return radarcrb::run_cli(argc, argv); }
