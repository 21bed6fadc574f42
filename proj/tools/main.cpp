#include "tapfm/cli.hpp"

int main(int argc, char** argv) { return tapfm::main_dispatch(argc, argv); }
