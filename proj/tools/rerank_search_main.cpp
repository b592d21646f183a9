#include <iostream>
#include <string>
#include <vector>

#include "rerank_search/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rerank_search::run_cli(args, std::cout, std::cerr);
}
