#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every draw is a pure function of (master seed, stream id, draw index), so
// replications can be generated in any order or on any number of threads and
// still produce identical values.

#include <array>
#include <cstdint>
#include <string_view>

namespace riskpool {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds, the Random123 reference parameterisation.
constexpr PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
        detail::mulhilo(detail::kPhiloxM0, ctr[0], hi0, lo0);
        detail::mulhilo(detail::kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += detail::kPhiloxW0;
        key[1] += detail::kPhiloxW1;
    }
    return ctr;
}

/// Identifies one reproducible stream of uniforms.
struct RngSpec {
    static constexpr std::string_view algorithm = "philox4x32-10";

    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    /// A child stream, e.g. one per replicate inside a batch.
    [[nodiscard]] constexpr RngSpec substream(std::uint64_t index) const {
        return {master_seed, detail::splitmix64(stream_id ^ detail::splitmix64(index + 0x632BE59BD9B4E019ull))};
    }

    friend constexpr bool operator==(const RngSpec&, const RngSpec&) = default;
};

/// Maps 64 random bits to a double in the open interval (0, 1).
constexpr double bits_to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Sequential reader over a stream. Draw j is the same value no matter how
/// the reader got there, so `at(j)` and the j-th `next()` agree.
class UniformStream {
public:
    explicit constexpr UniformStream(RngSpec spec, std::uint64_t first_index = 0)
        : key_{static_cast<std::uint32_t>(spec.master_seed), static_cast<std::uint32_t>(spec.master_seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(spec.stream_id)),
          stream_hi_(static_cast<std::uint32_t>(spec.stream_id >> 32)),
          index_(first_index) {}

    [[nodiscard]] constexpr double at(std::uint64_t index) const {
        const PhiloxCounter out = block(index >> 1);
        return pick(out, index & 1u);
    }

    constexpr double next() {
        const std::uint64_t blk = index_ >> 1;
        if (!cached_ || blk != cached_block_) {
            cache_ = block(blk);
            cached_block_ = blk;
            cached_ = true;
        }
        return pick(cache_, index_++ & 1u);
    }

    [[nodiscard]] constexpr std::uint64_t position() const { return index_; }

private:
    [[nodiscard]] constexpr PhiloxCounter block(std::uint64_t blk) const {
        return philox4x32_10({static_cast<std::uint32_t>(blk), static_cast<std::uint32_t>(blk >> 32), stream_lo_, stream_hi_},
                             key_);
    }

    static constexpr double pick(const PhiloxCounter& out, std::uint64_t lane) {
        const std::size_t i = static_cast<std::size_t>(lane) * 2;
        return bits_to_open_unit((static_cast<std::uint64_t>(out[i]) << 32) | out[i + 1]);
    }

    PhiloxKey key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t index_;
    PhiloxCounter cache_{};
    std::uint64_t cached_block_ = 0;
    bool cached_ = false;
};

} // namespace riskpool
