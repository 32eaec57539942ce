#include "sucm/cli.hpp"

int main(int argc, char** argv) { return sucm::run_cli(argc, argv); }
