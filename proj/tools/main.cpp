#include "qtd_cli.hpp"

int main(int argc, char** argv) { return qtd::cli::run(argc, argv); }
