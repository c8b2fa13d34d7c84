#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vibe {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// 2D vector

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
    double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// ---------------------------------------------------------------------------
// Object classes shared by tracker, simulator and synthesis

enum class ObjectClass { car = 0, bus, truck, pedestrian, bicycle };

inline constexpr int kNumClasses = 5;

inline const char* to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::car: return "car";
        case ObjectClass::bus: return "bus";
        case ObjectClass::truck: return "truck";
        case ObjectClass::pedestrian: return "pedestrian";
        case ObjectClass::bicycle: return "bicycle";
    }
    return "car";
}

inline ObjectClass object_class_from_string(const std::string& s) {
    if (s == "car") return ObjectClass::car;
    if (s == "bus") return ObjectClass::bus;
    if (s == "truck") return ObjectClass::truck;
    if (s == "pedestrian") return ObjectClass::pedestrian;
    if (s == "bicycle") return ObjectClass::bicycle;
    throw Error("unknown object class: " + s);
}

// Per-class value table, indexable by ObjectClass.
template <typename T>
struct ClassMap {
    std::array<T, kNumClasses> values{};
    T& operator[](ObjectClass c) { return values[static_cast<int>(c)]; }
    const T& operator[](ObjectClass c) const { return values[static_cast<int>(c)]; }
};

// ---------------------------------------------------------------------------
// Deterministic RNG.  xoshiro256++ seeded via splitmix64; normal deviates via
// the polar method.  Self-contained so that seeded runs are reproducible
// independent of the standard library's distribution implementations.

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
        has_spare_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        return n == 0 ? 0 : next_u64() % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Exponential with the given mean.
    double exponential(double mean) { return -mean * std::log(1.0 - uniform01()); }

    // Independent child stream; stable under (seed, tag).
    Rng fork(std::uint64_t tag) const {
        return Rng(state_[0] ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Fixed-order parallel reduction helper.  Splits [0, n) into `workers`
// contiguous chunks; each worker fills its own accumulator, and accumulators
// are merged in worker order so results are bit-reproducible for a given
// worker count.

template <typename Body, typename Merge>
void parallel_chunks(std::size_t n, int workers, const Body& body, const Merge& merge) {
    if (workers <= 1 || n < 2) {
        body(0, 0, n);
        merge(0);
        return;
    }
    const std::size_t w = static_cast<std::size_t>(workers);
    const std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t i = 0; i < w; ++i) {
        const std::size_t lo = std::min(n, i * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        threads.emplace_back([&body, i, lo, hi] { body(static_cast<int>(i), lo, hi); });
    }
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < w; ++i) merge(static_cast<int>(i));
}

}  // namespace vibe
