#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "gdoe/error.hpp"

int main(int argc, char** argv) {
  gdoe::tune_allocator();
  doctest::Context context(argc, argv);
  return context.run();
}
