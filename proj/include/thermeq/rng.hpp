#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

// Counter-based random numbers: Philox4x64-10 blocks, one independent stream
// per (seed, stream id).  Every draw maps to a fixed counter position, so
// trajectories are reproducible bit-for-bit regardless of threading, platform,
// or standard library.  Normals use the inverse-CDF (exactly one uniform per
// normal) for the same reason: std::normal_distribution is free to change its
// algorithm between implementations.
namespace thermeq::rng {

struct Philox4x64 {
    static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
    static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

    static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
        const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
        hi = static_cast<std::uint64_t>(p >> 64);
        lo = static_cast<std::uint64_t>(p);
    }

    static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                              std::array<std::uint64_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            std::uint64_t hi0, lo0, hi1, lo1;
            mulhilo(kMul0, ctr[0], hi0, lo0);
            mulhilo(kMul1, ctr[2], hi1, lo1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

// Quantile of the standard normal (Wichura's AS241, PPND16): |relative error|
// below 1e-15 over p in (0,1).  Used both for sampling and for test bands.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -x : x;
}

// One stream of the counter-based generator.  Streams with distinct ids are
// statistically independent; reconstructing a stream replays it exactly.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{seed, 0}, stream_id_(stream_id) {}

    std::uint64_t next_u64() {
        if (buffer_pos_ == 4) {
            buffer_ = Philox4x64::block({position_, 0, stream_id_, 0}, key_);
            ++position_;
            buffer_pos_ = 0;
        }
        return buffer_[buffer_pos_++];
    }

    // Uniform on the open interval (0,1): (x >> 11 + 1/2) * 2^-53.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal() { return normal_quantile(next_uniform()); }

    double next_normal(double mean, double stddev) { return mean + stddev * next_normal(); }

    double next_exponential(double rate) {
        if (!(rate > 0.0)) throw std::domain_error("next_exponential: rate must be positive");
        return -std::log(next_uniform()) / rate;
    }

    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::array<std::uint64_t, 2> key_;
    std::uint64_t stream_id_;
    std::uint64_t position_ = 0;
    std::array<std::uint64_t, 4> buffer_{};
    int buffer_pos_ = 4;
};

// Identifier for the full sampling construction, recorded in run manifests so
// outputs are attributable to the exact generator.
inline constexpr const char* kConstructionId = "philox4x64-10/u64-unif53/as241-normal/v1";

}  // namespace thermeq::rng
