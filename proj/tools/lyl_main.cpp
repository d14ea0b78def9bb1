#include <string>
#include <vector>

#include "lyl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lyl::run_cli(args);
}
