#include "kbrn/commands.hpp"

int main(int argc, char** argv) { return kbrn::cli::run_cli(argc, argv); }
