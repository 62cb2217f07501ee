#include "commands.hpp"

int main(int argc, char** argv) { return longsteer::cli::run(argc, argv); }
