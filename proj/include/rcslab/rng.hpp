#pragma once
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace rcslab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stable seed derivation: stream i of a master seed. Used so that chains,
// experiment jobs and repetitions never share a generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x853C49E6748FEA9BULL) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // canonical double in [0,1), 53 random bits
    double u01() { return (eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return u01() < p; }

    // Lemire's nearly divisionless bounded draw
    std::uint64_t below(std::uint64_t n) {
        if (n < 2) return 0;
        unsigned __int128 m = (unsigned __int128)eng_() * n;
        auto lo = (std::uint64_t)m;
        if (lo < n) {
            std::uint64_t t = (~n + 1) % n;
            while (lo < t) {
                m = (unsigned __int128)eng_() * n;
                lo = (std::uint64_t)m;
            }
        }
        return (std::uint64_t)(m >> 64);
    }

    std::string save() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }
    bool restore(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        return !is.fail();
    }

private:
    std::mt19937_64 eng_;
};

} // namespace rcslab
