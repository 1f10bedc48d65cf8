#include <iostream>
#include <string>
#include <vector>

#include "cdmp/cli.h"

int main(int argc, char** argv) {
  return cdmp::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
