#include <vector>

#include "ecgdg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ecgdg::cli::run(args);
}
