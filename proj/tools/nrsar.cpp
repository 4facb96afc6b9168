#include "cli_app.hpp"

int main(int argc, char** argv) { return nrsar::cli::run(argc, argv); }
