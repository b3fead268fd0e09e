#include "dhrn/rng.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

namespace dhrn {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x64687266u};
    return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(seeded_engine(seed, stream)) {}

double Rng::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double Rng::normal() { return normal_quantile(uniform()); }

std::uint64_t Rng::below(std::uint64_t n) {
    // Reject the top partial block so the modulo is unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
}

double normal_quantile(double u) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace dhrn
