// SPDX-License-Identifier: MIT
#include <cstdio>

#include <sdfreg/sdfreg.hpp>

int main() {
  std::puts("sdfreg CLI placeholder");
  return 0;
}
