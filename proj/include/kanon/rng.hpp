#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace kanon {

/// Seeded generator whose draws depend only on the mt19937_64 output
/// sequence, so results are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index on empty range");
        const std::uint64_t range = n;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
        std::uint64_t draw = engine_();
        while (draw >= limit) draw = engine_();
        return static_cast<std::size_t>(draw % range);
    }

    /// Uniform real in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Index drawn with probability proportional to weights[i].
    std::size_t weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (weights.empty() || total <= 0.0) throw std::invalid_argument("Rng::weighted needs positive mass");
        double target = unit() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (target < weights[i]) return i;
            target -= weights[i];
        }
        std::size_t last = weights.size() - 1;
        while (last > 0 && weights[last] <= 0.0) --last;
        return last;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace kanon
