#include "duotok/cli.hpp"

int main(int argc, char **argv) {
    return duotok::cli::run(argc, argv);
}
