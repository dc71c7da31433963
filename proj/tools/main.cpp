#include "neuralwarp/cli.hpp"

int main(int argc, char** argv) { return neuralwarp::cli::main(argc, argv); }
