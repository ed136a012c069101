#include "spurdec/cli.hpp"

int main(int argc, char** argv) {
    return spurdec::run_cli_main(argc, argv);
}
