#include "scenecast/cli.hpp"

int main(int argc, char** argv) { return scenecast::cli_run(argc, argv); }
