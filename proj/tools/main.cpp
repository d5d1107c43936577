#include "slotvid/train/trainer.hpp"

int main(int argc, char** argv) { return slotvid::cli_main(argc, argv); }
