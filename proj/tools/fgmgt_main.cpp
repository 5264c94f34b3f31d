#include <string>
#include <vector>

#include "fgmgt/cli.hpp"

int main(int argc, char** argv) {
  return fgmgt::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
