#include <iostream>

#include "caudit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return caudit::dispatch(args, std::cout, std::cerr);
}
