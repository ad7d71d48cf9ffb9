#include <iostream>

#include "sst/cli.hpp"

int main(int argc, char **argv)
{
    return sst::run_cli(argc, argv, std::cout, std::cerr);
}
