#include "tinr/cli.hpp"

int main(int argc, char** argv) { return tinr::cli(argc, argv); }
