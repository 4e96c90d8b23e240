#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace gwinv {

/// Counter-based RNG (Philox4x32-10). A stream is identified by (key, stream);
/// draws depend only on the counter, so independent streams never interact and
/// serial/parallel runs produce identical sequences.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    /// Uniform draw in the open interval (0,1).
    double uniform01();

    /// Standard normal via Box-Muller (second value cached).
    double normal();

    void fill_normal(std::span<double> out);

private:
    void refill();

    std::uint32_t key_[2];
    std::uint32_t ctr_[4];
    std::uint32_t buf_[4];
    int buf_pos_;
    double cached_normal_;
    bool has_cached_normal_;
};

/// Stable seed derivation from a master seed and a text label ("chain:3",
/// "dataset:ell=10:field=42", ...). FNV-1a over the label, mixed with the
/// master seed through a splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

} // namespace gwinv
