#include "cli.hpp"

int main(int argc, char** argv) { return dbvae::cli::run(argc, argv); }
