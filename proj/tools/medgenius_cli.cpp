#include "medgenius/cli_io.hpp"

int main(int argc, char** argv) { return medgenius::cli_io::run(argc, argv); }
