#include "cli_app.hpp"

int main(int argc, char** argv) { return vocalbeat::cli::run(argc, argv); }
