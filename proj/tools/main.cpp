#include "fabtwin/cli.hpp"

int main(int argc, char** argv) { return fabtwin::cli::run(argc, argv); }
