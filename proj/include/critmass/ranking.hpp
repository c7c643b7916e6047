#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/segmented.hpp"

namespace critmass {

enum class deviation_mode { vs_mean, vs_model };

struct DeviationEntry {
    int index = 0;
    std::string name;
    double deviation = 0;
};

struct ResidualReport {
    deviation_mode mode = deviation_mode::vs_mean;
    std::vector<DeviationEntry> deviations;  // dataset order, omitted records absent
    double range = 0;
    double std_dev = 0;
    std::set<int> excluded;  // indices omitted from deviations and statistics
};

namespace detail {

inline void finish_report(ResidualReport& report) {
    double lo = report.deviations.front().deviation;
    double hi = lo;
    double mean = 0.0;
    for (const auto& e : report.deviations) {
        lo = std::min(lo, e.deviation);
        hi = std::max(hi, e.deviation);
        mean += e.deviation;
    }
    const auto n = static_cast<double>(report.deviations.size());
    mean /= n;
    report.range = hi - lo;
    if (report.deviations.size() < 2) {
        report.std_dev = 0.0;
        return;
    }
    double ss = 0.0;
    for (const auto& e : report.deviations) ss += (e.deviation - mean) * (e.deviation - mean);
    report.std_dev = std::sqrt(ss / (n - 1.0));
}

}  // namespace detail

// Deviation of each quality score from the mean of the same reported set.
inline ResidualReport residuals_vs_mean(const Dataset& ds, bool include_excluded) {
    if (ds.records.empty()) throw validation_error("empty dataset");
    ResidualReport report;
    report.mode = deviation_mode::vs_mean;
    if (!include_excluded) report.excluded = ds.excluded;
    double mean = 0.0;
    std::size_t n = 0;
    for (const auto& r : ds.records) {
        if (!include_excluded && ds.is_excluded(r.index)) continue;
        mean += r.quality;
        ++n;
    }
    mean /= static_cast<double>(n);
    for (const auto& r : ds.records) {
        if (!include_excluded && ds.is_excluded(r.index)) continue;
        report.deviations.push_back({r.index, r.name, r.quality - mean});
    }
    detail::finish_report(report);
    return report;
}

// Deviation from the fitted expectation at each group's size; the fit must
// come from this dataset's active records.
inline ResidualReport residuals_vs_model(const Dataset& ds, const PiecewiseFit& fit) {
    if (static_cast<std::size_t>(fit.n_active) != ds.active_count())
        throw state_error("fit was computed on a different active set");
    ResidualReport report;
    report.mode = deviation_mode::vs_model;
    report.excluded = ds.excluded;
    for (const auto* r : ds.active())
        report.deviations.push_back({r->index, r->name, r->quality - fit.predict(r->headcount)});
    detail::finish_report(report);
    return report;
}

struct RankedGroup {
    std::string name;
    double deviation = 0;
    int rank = 0;
};

inline std::vector<RankedGroup> rank_groups(const ResidualReport& report) {
    std::vector<RankedGroup> out;
    out.reserve(report.deviations.size());
    for (const auto& e : report.deviations) out.push_back({e.name, e.deviation, 0});
    std::sort(out.begin(), out.end(), [](const RankedGroup& a, const RankedGroup& b) {
        if (a.deviation != b.deviation) return a.deviation > b.deviation;
        return a.name < b.name;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
    return out;
}

}  // namespace critmass
