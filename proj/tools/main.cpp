#include "cli.hpp"

int main(int argc, char** argv) { return structsql::cli::run(argc, argv); }
