#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace badapprox {

// Thrown when an enumeration or sampling request would exceed its work budget.
// `required` is the amount of work the request would have needed.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, double required)
      : std::runtime_error(what), required_(required) {}
  double required() const noexcept { return required_; }

 private:
  double required_;
};

inline constexpr double kLn2 = std::numbers::ln2;

// Uniform double in [0,1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Independent stream for shard `shard` of a run seeded with `seed`.
inline std::mt19937_64 shard_rng(std::uint64_t seed, std::uint64_t shard) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shard), static_cast<std::uint32_t>(shard >> 32),
                    0x5eedU};
  return std::mt19937_64(seq);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace badapprox
