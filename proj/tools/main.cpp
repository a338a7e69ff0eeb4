#include "abmuq/pipeline.hpp"

int main(int argc, char** argv) { return abmuq::pipeline::run_command(argc, argv); }
