#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace camscope {

// SplitMix64-based generator. Deterministic across platforms; all sampling
// used by the pipeline goes through this class so that seeded runs are
// bit-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        if (n <= 1) return 0;
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

    // Stable stream derivation: mixes a seed with tags so that independent
    // consumers (per class, per image, per epoch) get decorrelated streams.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t z = seed ^ (tag + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
        // FNV-1a
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ull;
        }
        return derive(seed, h);
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
        return derive(derive(seed, a), b);
    }

    static std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t b) {
        return derive(derive(seed, tag), b);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace camscope
