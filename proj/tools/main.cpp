#include "m3h/cli.hpp"

int main(int argc, char** argv) { return m3h::run(argc, argv); }
