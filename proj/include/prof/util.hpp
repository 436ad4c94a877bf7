#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace prof {

// Stable 64-bit FNV-1a; used wherever a seed is derived from text so that
// results do not depend on std::hash.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 14695981039346656037ULL);

// Mixes several seeds into one (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string sha256_hex(std::string_view data);

// Uniform double in [0, 1) from the top 53 bits; platform independent,
// unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection; platform independent.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary file and rename. Leaves the file untouched when
// the content is already identical, so reruns do not bump mtimes.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string utc_timestamp();

// Runs fn(0..n-1) on up to `workers` threads pulling from a shared counter.
// The first exception thrown by fn is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace prof
