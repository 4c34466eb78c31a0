#include "commands.hpp"

int main(int argc, char** argv) { return nutmeg::cli::run(argc, argv); }
