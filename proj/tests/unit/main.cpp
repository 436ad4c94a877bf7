#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>

#include "prof/backend.hpp"

int main(int argc, char** argv) {
  doctest::Context context(argc, argv);
  const int rc = context.run();
  if (context.shouldExit()) return rc;
  // Every backend in the suite is scripted or uses a fake transport.
  if (prof::network_call_count() != 0) {
    std::fprintf(stderr, "unit tests issued %llu network calls\n",
                 static_cast<unsigned long long>(prof::network_call_count()));
    return 1;
  }
  return rc;
}
