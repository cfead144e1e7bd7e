#include <cstdio>

int main() {
  std::puts("mtm: placeholder");
  return 0;
}
