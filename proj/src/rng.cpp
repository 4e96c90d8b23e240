#include "gwinv/rng.hpp"

#include <cmath>

namespace gwinv {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

CounterRng::CounterRng(std::uint64_t key, std::uint64_t stream)
    : buf_pos_(4), cached_normal_(0.0), has_cached_normal_(false)
{
    key_[0] = static_cast<std::uint32_t>(key);
    key_[1] = static_cast<std::uint32_t>(key >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
}

void CounterRng::refill()
{
    std::uint32_t x0 = ctr_[0], x1 = ctr_[1], x2 = ctr_[2], x3 = ctr_[3];
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, x0, hi0, lo0);
        mulhilo(kPhiloxM1, x2, hi1, lo1);
        const std::uint32_t y0 = hi1 ^ x1 ^ k0;
        const std::uint32_t y1 = lo1;
        const std::uint32_t y2 = hi0 ^ x3 ^ k1;
        const std::uint32_t y3 = lo0;
        x0 = y0; x1 = y1; x2 = y2; x3 = y3;
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    buf_[0] = x0; buf_[1] = x1; buf_[2] = x2; buf_[3] = x3;
    buf_pos_ = 0;
    // 64-bit increment of the low counter half
    if (++ctr_[0] == 0) ++ctr_[1];
}

std::uint64_t CounterRng::next_u64()
{
    if (buf_pos_ > 2) refill();
    const std::uint64_t lo = buf_[buf_pos_];
    const std::uint64_t hi = buf_[buf_pos_ + 1];
    buf_pos_ += 2;
    return (hi << 32) | lo;
}

double CounterRng::uniform01()
{
    // 53-bit mantissa, offset by half an ulp so the result is never 0 or 1
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal()
{
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

void CounterRng::fill_normal(std::span<double> out)
{
    for (double& v : out) v = normal();
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label)
{
    std::uint64_t h = 0xCBF29CE484222325ull; // FNV offset basis
    for (const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull; // FNV prime
    }
    return splitmix64(master ^ splitmix64(h));
}

} // namespace gwinv
