#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string_view>

namespace hiergame {

// Stream derivation
// -----------------
// Every run owns two independent mt19937_64 streams: one for the upper-level
// noise xi and one for the sphere directions W. Stream seeds are derived from
// (master_seed, replica, purpose-tag) through splitmix64, so each replica and
// each purpose is individually reproducible.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master_seed,
                                 std::uint64_t replica,
                                 std::string_view purpose) {
  std::uint64_t s = splitmix64(master_seed);
  s = splitmix64(s ^ splitmix64(replica + 1));
  s = splitmix64(s ^ fnv1a64(purpose));
  return s;
}

// The two streams a single solver run consumes. Never share a bundle across
// threads; derive one per replica instead.
struct RngBundle {
  std::mt19937_64 xi;
  std::mt19937_64 w;
};

inline RngBundle make_run_rngs(std::uint64_t master_seed,
                               std::uint64_t replica) {
  return RngBundle{std::mt19937_64(derive_seed(master_seed, replica, "xi")),
                   std::mt19937_64(derive_seed(master_seed, replica, "W"))};
}

inline double draw_gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace hiergame
