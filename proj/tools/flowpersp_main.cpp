#include <iostream>

#include "flowpersp/app.hpp"

int main(int argc, char** argv) {
  return flowpersp::app::run(argc, argv, std::cout, std::cerr);
}
