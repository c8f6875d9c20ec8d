#include "dpsr/cli/dispatch.hpp"

int main(int argc, char** argv) { return dpsr::cli::dispatch(argc, argv); }
