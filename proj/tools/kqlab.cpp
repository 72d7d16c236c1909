#include <iostream>

#include "kq/errors.hpp"
#include "kq/harness/runner.hpp"

int main(int argc, char** argv) {
  try {
    return kq::harness::cli_main(argc, argv, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "kqlab: " << e.what() << '\n';
    return 1;
  }
}
