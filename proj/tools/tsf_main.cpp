#include <iostream>

#include "tsf/cli_analysis/cli.hpp"

int main(int argc, char** argv) {
  return tsf::cli_analysis::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
