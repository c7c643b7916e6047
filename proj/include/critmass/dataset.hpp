#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "critmass/errors.hpp"

namespace critmass {

struct GroupRecord {
    int index = 0;          // 1-based, file order
    std::string name;
    double headcount = 0.0;  // N, FTE units
    double quality = 0.0;    // s, funding-formula score in [0, 100]
};

struct QualityProfile {
    double p4 = 0, p3 = 0, p2 = 0, p1 = 0, pu = 0;  // percentage shares per star band

    void validate() const {
        const double shares[5] = {p4, p3, p2, p1, pu};
        double sum = 0.0;
        for (double v : shares) {
            if (v < 0.0 || v > 100.0)
                throw validation_error("profile share outside [0, 100]");
            sum += v;
        }
        if (std::fabs(sum - 100.0) > 1e-9)
            throw validation_error("profile shares must sum to 100");
    }
};

struct WeightScheme {
    double w4 = 0, w3 = 0, w2 = 0, w1 = 0, wu = 0;

    void validate() const {
        if (!(w4 > 0.0)) throw validation_error("weight scheme requires w4 > 0");
        if (!(w4 >= w3 && w3 >= w2 && w2 >= w1 && w1 >= wu && wu >= 0.0))
            throw validation_error("weights must be nonincreasing and nonnegative");
    }

    // RAE 2009 funding weights 7:3:1 and the 2010 revision 9:3:1
    static WeightScheme scheme_2009() { return {7, 3, 1, 0, 0}; }
    static WeightScheme scheme_2010() { return {9, 3, 1, 0, 0}; }
};

// Weighted star profile normalized by the top weight, so an all-4* profile
// scores exactly 100 and the result shares Table 1's scale.
inline double quality_from_profile(const QualityProfile& profile, const WeightScheme& scheme) {
    profile.validate();
    scheme.validate();
    return (scheme.w4 * profile.p4 + scheme.w3 * profile.p3 + scheme.w2 * profile.p2 +
            scheme.w1 * profile.p1 + scheme.wu * profile.pu) / scheme.w4;
}

class Dataset {
  public:
    std::vector<GroupRecord> records;
    std::set<int> excluded;

    std::size_t active_count() const { return records.size() - excluded.size(); }
    bool is_excluded(int index) const { return excluded.count(index) > 0; }

    std::vector<const GroupRecord*> active() const {
        std::vector<const GroupRecord*> out;
        out.reserve(active_count());
        for (const auto& r : records)
            if (!is_excluded(r.index)) out.push_back(&r);
        return out;
    }

    std::vector<double> active_headcounts() const {
        std::vector<double> out;
        for (const auto& r : records)
            if (!is_excluded(r.index)) out.push_back(r.headcount);
        return out;
    }

    std::vector<double> active_qualities() const {
        std::vector<double> out;
        for (const auto& r : records)
            if (!is_excluded(r.index)) out.push_back(r.quality);
        return out;
    }

    void validate() const {
        std::set<int> seen;
        for (const auto& r : records) {
            if (!(r.headcount > 0.0))
                throw validation_error("record " + std::to_string(r.index) + ": headcount must be > 0");
            if (!seen.insert(r.index).second)
                throw validation_error("duplicate record index " + std::to_string(r.index));
        }
        for (int i : excluded)
            if (!seen.count(i)) throw validation_error("excluded index " + std::to_string(i) + " not present");
    }
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) {
        // trim surrounding whitespace
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace detail

// Delimited text, comma or tab, optional header. Row layouts:
//   name,N,s            direct quality
//   name,N,s,excluded   round-trip form (excluded is 0/1)
//   name,N,p4,p3,p2,p1,pu   star profile, converted through the scheme
inline Dataset load_dataset(std::istream& in, const WeightScheme& scheme = WeightScheme::scheme_2009()) {
    Dataset ds;
    std::string line;
    int line_no = 0;
    int next_index = 1;
    bool saw_data = false;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        char delim = line.find('\t') != std::string::npos ? '\t' : ',';
        auto fields = detail::split_fields(line, delim);
        double n_val;
        if (!saw_data && !header_skipped && fields.size() >= 2 && !detail::parse_double(fields[1], n_val)) {
            header_skipped = true;  // at most one header row
            continue;
        }
        if (fields.size() != 3 && fields.size() != 4 && fields.size() != 7)
            throw parse_error("line " + std::to_string(line_no) + ": expected 3, 4, or 7 columns, got " +
                              std::to_string(fields.size()));
        GroupRecord rec;
        rec.index = next_index;
        rec.name = fields[0];
        if (!detail::parse_double(fields[1], rec.headcount))
            throw parse_error("line " + std::to_string(line_no) + ": bad headcount '" + fields[1] + "'");
        if (!(rec.headcount > 0.0))
            throw validation_error("line " + std::to_string(line_no) + ": headcount must be > 0", "load");
        bool excluded_flag = false;
        if (fields.size() == 7) {
            double p[5];
            for (int i = 0; i < 5; ++i)
                if (!detail::parse_double(fields[static_cast<std::size_t>(2 + i)], p[i]))
                    throw parse_error("line " + std::to_string(line_no) + ": bad profile share '" +
                                      fields[static_cast<std::size_t>(2 + i)] + "'");
            QualityProfile profile{p[0], p[1], p[2], p[3], p[4]};
            try {
                rec.quality = quality_from_profile(profile, scheme);
            } catch (const validation_error& e) {
                throw validation_error("line " + std::to_string(line_no) + ": " + e.what(), "load");
            }
        } else {
            if (!detail::parse_double(fields[2], rec.quality))
                throw parse_error("line " + std::to_string(line_no) + ": bad quality '" + fields[2] + "'");
            if (fields.size() == 4) {
                double flag;
                if (!detail::parse_double(fields[3], flag))
                    throw parse_error("line " + std::to_string(line_no) + ": bad excluded flag '" + fields[3] + "'");
                excluded_flag = flag != 0.0;
            }
        }
        ds.records.push_back(rec);
        if (excluded_flag) ds.excluded.insert(rec.index);
        ++next_index;
        saw_data = true;
    }
    if (ds.records.empty()) throw validation_error("no records", "load");
    ds.validate();
    return ds;
}

inline void serialize(const Dataset& ds, std::ostream& out) {
    out << "name,N,s,excluded\n";
    char buf[64];
    for (const auto& r : ds.records) {
        out << r.name << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.headcount);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.quality);
        out << buf << ',' << (ds.is_excluded(r.index) ? 1 : 0) << '\n';
    }
}

// Non-destructive exclusion by exact name or by index ("#9" form handled by
// the CLI). Idempotent when the record is already excluded.
inline Dataset exclude(const Dataset& ds, const std::string& name) {
    const GroupRecord* match = nullptr;
    for (const auto& r : ds.records) {
        if (r.name == name) {
            if (match) throw lookup_error("ambiguous name '" + name + "'");
            match = &r;
        }
    }
    if (!match) throw lookup_error("no record named '" + name + "'");
    Dataset out = ds;
    out.excluded.insert(match->index);
    return out;
}

inline Dataset exclude(const Dataset& ds, int index) {
    for (const auto& r : ds.records) {
        if (r.index == index) {
            Dataset out = ds;
            out.excluded.insert(index);
            return out;
        }
    }
    throw lookup_error("no record with index " + std::to_string(index));
}

}  // namespace critmass
