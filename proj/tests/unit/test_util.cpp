#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "prof/util.hpp"

using namespace prof;

TEST_CASE("fnv1a64 matches reference vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("sha256_hex") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mix_seed spreads nearby inputs") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 10; ++a) {
    for (std::uint64_t b = 0; b < 10; ++b) seen.insert(mix_seed(a, b));
  }
  CHECK(seen.size() == 100);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("uniform draws stay in range and are reproducible") {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(uniform01(b) == u);
    const auto k = uniform_index(a, 7);
    CHECK(k < 7);
    CHECK(uniform_index(b, 7) == k);
  }
}

TEST_CASE("write_file_atomic leaves identical content untouched") {
  const auto dir = std::filesystem::temp_directory_path() / "prof_util_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "f.txt";
  write_file_atomic(path, "hello");
  CHECK(read_file(path) == "hello");
  const auto t0 = std::filesystem::last_write_time(path);
  write_file_atomic(path, "hello");
  CHECK(std::filesystem::last_write_time(path) == t0);
  write_file_atomic(path, "bye");
  CHECK(read_file(path) == "bye");
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h.load() == 1);

  CHECK_THROWS_AS(parallel_for(50, 3, [](std::size_t i) {
                    if (i == 17) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  parallel_for(0, 4, [](std::size_t) { FAIL("called on empty range"); });
}

TEST_CASE("trim and to_lower") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(trim("   ").empty());
  CHECK(to_lower("AbC") == "abc");
}
