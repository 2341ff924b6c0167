#include "rcslab/app.hpp"

int main(int argc, char** argv) { return rcslab::run_cli(argc, argv); }
