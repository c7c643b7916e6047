#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/rng.hpp"

namespace critmass {

struct MicroParams {
    double a = 0;        // mean individual strength
    double b = 0;        // mean pairwise interaction strength
    double c = 0;        // mean inter-subgroup interaction strength
    double n_c = 2;      // fragmentation cutoff
    double noise_sd = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(n_c > 1.0)) throw validation_error("fragmentation cutoff must exceed 1");
        if (b < 0.0 || c < 0.0) throw validation_error("interaction strengths must be nonnegative");
        if (noise_sd < 0.0) throw validation_error("noise sd must be nonnegative");
    }
};

struct SyntheticGroup {
    double headcount = 0;
    int subgroup_count = 1;
    double subgroup_size = 0;
    double strength = 0;
    double quality = 0;
};

// Up to the cutoff every pair interacts; beyond it the group fragments into
// the fewest subgroups that keep each at or below the cutoff, pairwise terms
// act within subgroups, and a weaker term couples the subgroups.
inline SyntheticGroup micro_group(double n, const MicroParams& params) {
    params.validate();
    if (!(n > 0.0)) throw validation_error("headcount must be > 0");
    SyntheticGroup g;
    g.headcount = n;
    if (n <= params.n_c) {
        g.subgroup_count = 1;
        g.subgroup_size = n;
        g.strength = n * params.a + 0.5 * n * (n - 1.0) * params.b;
    } else {
        g.subgroup_count = static_cast<int>(std::ceil(n / params.n_c));
        g.subgroup_size = n / static_cast<double>(g.subgroup_count);
        const double m = static_cast<double>(g.subgroup_count);
        g.strength = n * params.a + 0.5 * n * (g.subgroup_size - 1.0) * params.b +
                     0.5 * m * (m - 1.0) * params.c;
    }
    g.quality = g.strength / n;
    return g;
}

inline double expected_strength(double n, const MicroParams& params) {
    return micro_group(n, params).strength;
}

inline double expected_quality(double n, const MicroParams& params) {
    return micro_group(n, params).quality;
}

namespace detail {

inline std::string synth_name(std::size_t i, std::size_t total) {
    int width = 1;
    for (std::size_t v = total; v >= 10; v /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth-%0*d", width, static_cast<int>(i + 1));
    return buf;
}

}  // namespace detail

// One record per size; record i draws its noise from a stream seeded with
// seed + i, so generation is reproducible and order-independent.
inline Dataset generate_dataset(const std::vector<double>& sizes, const MicroParams& params) {
    params.validate();
    if (sizes.empty()) throw validation_error("no sizes given");
    Dataset ds;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        GroupRecord rec;
        rec.index = static_cast<int>(i + 1);
        rec.name = detail::synth_name(i, sizes.size());
        rec.headcount = sizes[i];
        double q = expected_quality(sizes[i], params);
        if (params.noise_sd > 0.0) {
            rng stream(params.seed + static_cast<std::uint64_t>(i));
            q += params.noise_sd * stream.next_normal();
        }
        rec.quality = q;
        ds.records.push_back(rec);
    }
    ds.validate();
    return ds;
}

// Deliberately sharp two-line truth (a continuous hinge) for estimator
// validation, as opposed to the smooth micro-model curve above.
struct PlantedTwoLine {
    double a1 = 0, b1 = 0, b2 = 0, n_c = 0;

    double quality(double n) const {
        return n <= n_c ? a1 + b1 * n : a1 + b1 * n_c + b2 * (n - n_c);
    }
};

inline Dataset generate_twoline(const PlantedTwoLine& truth, const std::vector<double>& sizes,
                                double noise_sd, std::uint64_t seed) {
    if (!(truth.n_c > 0.0)) throw validation_error("planted breakpoint must be positive");
    if (noise_sd < 0.0) throw validation_error("noise sd must be nonnegative");
    if (sizes.empty()) throw validation_error("no sizes given");
    Dataset ds;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        GroupRecord rec;
        rec.index = static_cast<int>(i + 1);
        rec.name = detail::synth_name(i, sizes.size());
        rec.headcount = sizes[i];
        rec.quality = truth.quality(sizes[i]);
        if (noise_sd > 0.0) {
            rng stream(seed + static_cast<std::uint64_t>(i));
            rec.quality += noise_sd * stream.next_normal();
        }
        ds.records.push_back(rec);
    }
    ds.validate();
    return ds;
}

}  // namespace critmass
