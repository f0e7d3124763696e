// Placeholder entry point; replaced by the full CLI once the harness lands.
#include <cstdio>

int main() {
  std::fprintf(stderr, "cq: not wired up yet\n");
  return 2;
}
