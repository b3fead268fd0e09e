#pragma once
// Reproducible random streams.
//
// Every stream is a std::mt19937_64 seeded through std::seed_seq from
// (seed, stream id); both engines are fully specified by the standard, so the
// bit stream is identical across platforms. Normal variates use the inverse
// normal CDF on a 53-bit open-interval uniform.

#include <cstdint>
#include <random>
#include <string>

namespace dhrn {

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

/// Standard normal quantile.
double normal_quantile(double u);
double normal_cdf(double x);

}  // namespace dhrn
