#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/nls.hpp"
#include "critmass/ranking.hpp"
#include "critmass/segmented.hpp"
#include "critmass/stats.hpp"

namespace critmass {

// Ten significant digits keeps reruns byte-identical while exceeding the
// precision any downstream tolerance needs.
inline std::string format_double(double v) {
    if (std::isnan(v) || std::isinf(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Minimal JSON tree that preserves insertion order of object keys.
class json {
  public:
    static json null() { return json(kind::null_v); }
    static json boolean(bool v) {
        json j(kind::bool_v);
        j.bool_ = v;
        return j;
    }
    static json integer(long long v) {
        json j(kind::int_v);
        j.int_ = v;
        return j;
    }
    static json number(double v) {
        json j(kind::num_v);
        j.num_ = v;
        return j;
    }
    static json str(std::string v) {
        json j(kind::str_v);
        j.str_ = std::move(v);
        return j;
    }
    static json array() { return json(kind::arr_v); }
    static json object() { return json(kind::obj_v); }

    json& set(const std::string& key, json v) {
        fields_.emplace_back(key, std::move(v));
        return *this;
    }
    json& push(json v) {
        items_.push_back(std::move(v));
        return *this;
    }

    void write(std::ostream& out, int indent = 0) const {
        const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
        const std::string pad_in(static_cast<std::size_t>(indent + 1) * 2, ' ');
        switch (k_) {
            case kind::null_v: out << "null"; break;
            case kind::bool_v: out << (bool_ ? "true" : "false"); break;
            case kind::int_v: out << int_; break;
            case kind::num_v: out << format_double(num_); break;
            case kind::str_v: write_string(out, str_); break;
            case kind::arr_v:
                if (items_.empty()) {
                    out << "[]";
                    break;
                }
                out << "[\n";
                for (std::size_t i = 0; i < items_.size(); ++i) {
                    out << pad_in;
                    items_[i].write(out, indent + 1);
                    out << (i + 1 < items_.size() ? ",\n" : "\n");
                }
                out << pad << "]";
                break;
            case kind::obj_v:
                if (fields_.empty()) {
                    out << "{}";
                    break;
                }
                out << "{\n";
                for (std::size_t i = 0; i < fields_.size(); ++i) {
                    out << pad_in;
                    write_string(out, fields_[i].first);
                    out << ": ";
                    fields_[i].second.write(out, indent + 1);
                    out << (i + 1 < fields_.size() ? ",\n" : "\n");
                }
                out << pad << "}";
                break;
        }
    }

  private:
    enum class kind { null_v, bool_v, int_v, num_v, str_v, arr_v, obj_v };
    explicit json(kind k) : k_(k) {}

    static void write_string(std::ostream& out, const std::string& s) {
        out << '"';
        for (char c : s) {
            switch (c) {
                case '"': out << "\\\""; break;
                case '\\': out << "\\\\"; break;
                case '\n': out << "\\n"; break;
                case '\r': out << "\\r"; break;
                case '\t': out << "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out << buf;
                    } else {
                        out << c;
                    }
            }
        }
        out << '"';
    }

    kind k_;
    bool bool_ = false;
    long long int_ = 0;
    double num_ = 0;
    std::string str_;
    std::vector<json> items_;
    std::vector<std::pair<std::string, json>> fields_;
};

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

struct RunConfig {
    std::string input;
    std::string weights = "2009";
    std::vector<std::string> exclusions;
    continuity_mode mode = continuity_mode::free;
    int resamples = 10000;
    std::uint64_t seed = 0;
    double level = 0.95;
};

inline WeightScheme scheme_from_name(const std::string& name) {
    if (name == "2009") return WeightScheme::scheme_2009();
    if (name == "2010") return WeightScheme::scheme_2010();
    throw usage_error("unknown weight scheme '" + name + "' (expected 2009 or 2010)");
}

inline Dataset load_dataset_file(const std::string& path, const WeightScheme& scheme) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open input file '" + path + "'");
    return load_dataset(in, scheme);
}

// Selectors are record names, or "#k" for the 1-based file index.
inline Dataset apply_exclusions(Dataset ds, const std::vector<std::string>& selectors) {
    for (const auto& sel : selectors) {
        if (!sel.empty() && sel[0] == '#') {
            char* end = nullptr;
            const long idx = std::strtol(sel.c_str() + 1, &end, 10);
            if (end != sel.c_str() + sel.size() || sel.size() == 1)
                throw usage_error("bad index selector '" + sel + "'");
            ds = exclude(ds, static_cast<int>(idx));
        } else {
            ds = exclude(ds, sel);
        }
    }
    return ds;
}

inline std::string headline_mass(const CriticalMasses& masses) {
    const long nk = std::lround(masses.lower);
    if (std::isnan(masses.se_lower)) return "N_k = " + std::to_string(nk);
    // uncertainty rounds up: quoting less error than measured would overstate precision
    const long err = static_cast<long>(std::ceil(masses.se_lower));
    return "N_k = " + std::to_string(nk) + " ± " + std::to_string(err);
}

struct AnalysisReport {
    RunConfig config;
    Dataset dataset;
    PiecewiseFit fit;
    CriticalMasses masses;
    Classification classification;
    std::vector<TestResult> tests;
    std::vector<ComparisonRow> comparison;
    ResidualReport vs_mean_all, vs_mean_active, vs_model;
    std::vector<double> band_grid;
    ConfidenceBand band;
    int leverage_index = 0;
    std::string leverage_name;
    double leverage_hat = 0, leverage_mean_hat = 0;
    bool leverage_flag = false;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = i + 1 == count ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return out;
}

inline AnalysisReport run_full_analysis(const RunConfig& config) {
    if (config.resamples < 200) throw usage_error("resamples must be at least 200");
    if (!(config.level > 0.0 && config.level < 1.0)) throw usage_error("band level must be inside (0, 1)");
    AnalysisReport rep;
    rep.config = config;
    rep.dataset = apply_exclusions(load_dataset_file(config.input, scheme_from_name(config.weights)),
                                   config.exclusions);
    rep.fit = fit_piecewise(rep.dataset, config.mode);
    bootstrap_errors(rep.fit, rep.dataset, config.resamples, config.seed);
    rep.masses = critical_masses(rep.fit);
    rep.classification = classify(rep.dataset, rep.masses.lower, rep.masses.upper);
    rep.tests.push_back(test_no_correlation(rep.dataset));
    rep.tests.push_back(test_zero_right_slope(rep.dataset, rep.fit));
    rep.tests.push_back(test_equal_slopes(rep.fit));
    rep.tests.push_back(ks_normality(rep.fit.residuals));
    rep.comparison = compare_ansaetze(rep.dataset, config.mode);
    rep.vs_mean_all = residuals_vs_mean(rep.dataset, true);
    rep.vs_mean_active = residuals_vs_mean(rep.dataset, false);
    rep.vs_model = residuals_vs_model(rep.dataset, rep.fit);

    const auto active = rep.dataset.active();
    const auto x = rep.dataset.active_headcounts();
    const auto hats = hat_values(x, rep.fit);
    std::size_t big = 0;
    double hat_sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        hat_sum += hats[i];
        if (x[i] > x[big]) big = i;
    }
    rep.leverage_index = active[big]->index;
    rep.leverage_name = active[big]->name;
    rep.leverage_hat = hats[big];
    rep.leverage_mean_hat = hat_sum / static_cast<double>(x.size());
    rep.leverage_flag = rep.leverage_hat > 3.0 * rep.leverage_mean_hat;

    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    rep.band_grid = linspace(*mn, *mx, 200);
    rep.band = confidence_band(rep.fit, rep.band_grid, config.level);
    return rep;
}

inline json excluded_json(const Dataset& ds) {
    json arr = json::array();
    for (const auto& r : ds.records) {
        if (!ds.is_excluded(r.index)) continue;
        json e = json::object();
        e.set("index", json::integer(r.index));
        e.set("name", json::str(r.name));
        arr.push(std::move(e));
    }
    return arr;
}

inline json fit_json(const AnalysisReport& rep) {
    json j = json::object();
    json params = json::object();
    params.set("a1", json::number(rep.fit.a1));
    params.set("b1", json::number(rep.fit.b1));
    params.set("a2", json::number(rep.fit.a2));
    params.set("b2", json::number(rep.fit.b2));
    j.set("parameters", std::move(params));
    json se = json::object();
    se.set("a1", json::number(rep.fit.se_a1));
    se.set("b1", json::number(rep.fit.se_b1));
    se.set("a2", json::number(rep.fit.se_a2));
    se.set("b2", json::number(rep.fit.se_b2));
    se.set("breakpoint", json::number(rep.fit.se_breakpoint));
    j.set("standard_errors", std::move(se));
    j.set("breakpoint", json::number(rep.fit.breakpoint));
    j.set("r_squared", json::number(rep.fit.r_squared));
    j.set("sse", json::number(rep.fit.sse));
    j.set("mode", json::str(rep.fit.mode == continuity_mode::continuous ? "continuous" : "free"));
    j.set("n_active", json::integer(rep.fit.n_active));
    j.set("degenerate_resamples", json::integer(rep.fit.degenerate_resamples));
    json masses = json::object();
    masses.set("lower", json::number(rep.masses.lower));
    masses.set("upper", json::number(rep.masses.upper));
    masses.set("se_lower", json::number(rep.masses.se_lower));
    masses.set("se_upper", json::number(rep.masses.se_upper));
    masses.set("headline", json::str(headline_mass(rep.masses)));
    j.set("critical_masses", std::move(masses));
    json counts = json::object();
    counts.set("small", json::integer(rep.classification.small));
    counts.set("medium", json::integer(rep.classification.medium));
    counts.set("large", json::integer(rep.classification.large));
    j.set("classification_counts", std::move(counts));
    j.set("excluded", excluded_json(rep.dataset));
    return j;
}

inline json tests_json(const std::vector<TestResult>& tests) {
    json arr = json::array();
    for (const auto& t : tests) {
        json e = json::object();
        e.set("name", json::str(t.name));
        e.set("statistic", json::number(t.statistic));
        e.set("p_value", json::number(t.p_value));
        e.set("dof", json::number(t.dof));
        e.set("reject_at_005", json::boolean(t.reject_at_005));
        e.set("approximate", json::boolean(t.approximate));
        arr.push(std::move(e));
    }
    return arr;
}

inline json comparison_json(const std::vector<ComparisonRow>& rows) {
    json arr = json::array();
    for (const auto& row : rows) {
        json e = json::object();
        e.set("model", json::str(row.model));
        e.set("n_parameters", json::integer(row.n_parameters));
        if (row.error.empty()) {
            e.set("r_squared", json::number(row.r_squared));
            e.set("sse", json::number(row.sse));
            e.set("converged", json::boolean(row.converged));
            json params = json::array();
            for (double p : row.parameters) params.push(json::number(p));
            e.set("parameters", std::move(params));
        } else {
            e.set("error", json::str(row.error));
        }
        arr.push(std::move(e));
    }
    return arr;
}

inline json residual_summary_json(const ResidualReport& rep) {
    json e = json::object();
    e.set("mode", json::str(rep.mode == deviation_mode::vs_mean ? "vs_mean" : "vs_model"));
    e.set("n", json::integer(static_cast<long long>(rep.deviations.size())));
    e.set("range", json::number(rep.range));
    e.set("std_dev", json::number(rep.std_dev));
    return e;
}

inline json full_report_json(const AnalysisReport& rep) {
    json j = json::object();
    json cfg = json::object();
    cfg.set("input", json::str(rep.config.input));
    cfg.set("weights", json::str(rep.config.weights));
    json ex = json::array();
    for (const auto& s : rep.config.exclusions) ex.push(json::str(s));
    cfg.set("exclude", std::move(ex));
    cfg.set("mode", json::str(rep.config.mode == continuity_mode::continuous ? "continuous" : "free"));
    cfg.set("resamples", json::integer(rep.config.resamples));
    cfg.set("seed", json::integer(static_cast<long long>(rep.config.seed)));
    cfg.set("band_level", json::number(rep.config.level));
    j.set("config", std::move(cfg));

    double mean_n = 0.0, mean_s = 0.0;
    for (const auto& r : rep.dataset.records) {
        mean_n += r.headcount;
        mean_s += r.quality;
    }
    const auto total = static_cast<double>(rep.dataset.records.size());
    json ds = json::object();
    ds.set("n_records", json::integer(static_cast<long long>(rep.dataset.records.size())));
    ds.set("n_active", json::integer(static_cast<long long>(rep.dataset.active_count())));
    ds.set("mean_headcount", json::number(mean_n / total));
    ds.set("mean_quality", json::number(mean_s / total));
    j.set("dataset", std::move(ds));

    j.set("fit", fit_json(rep));
    j.set("tests", tests_json(rep.tests));
    j.set("comparison", comparison_json(rep.comparison));
    json res = json::object();
    res.set("vs_mean", residual_summary_json(rep.vs_mean_all));
    res.set("vs_mean_active", residual_summary_json(rep.vs_mean_active));
    res.set("vs_model", residual_summary_json(rep.vs_model));
    j.set("residuals", std::move(res));

    json lev = json::object();
    lev.set("index", json::integer(rep.leverage_index));
    lev.set("name", json::str(rep.leverage_name));
    lev.set("hat", json::number(rep.leverage_hat));
    lev.set("mean_hat", json::number(rep.leverage_mean_hat));
    lev.set("outlier_candidate", json::boolean(rep.leverage_flag));
    j.set("leverage", std::move(lev));
    return j;
}

inline void emit_plot_data(const AnalysisReport& rep, const std::string& which, std::ostream& out) {
    if (which == "scatter") {
        out << "N,s,excluded_flag\n";
        for (const auto& r : rep.dataset.records)
            out << format_double(r.headcount) << ',' << format_double(r.quality) << ','
                << (rep.dataset.is_excluded(r.index) ? 1 : 0) << '\n';
    } else if (which == "fit") {
        out << "N_grid,prediction,band_lo,band_hi\n";
        for (std::size_t i = 0; i < rep.band_grid.size(); ++i)
            out << format_double(rep.band_grid[i]) << ',' << format_double(rep.fit.predict(rep.band_grid[i]))
                << ',' << format_double(rep.band.lower[i]) << ',' << format_double(rep.band.upper[i]) << '\n';
    } else if (which == "rank-mean" || which == "rank-model") {
        const ResidualReport& res = which == "rank-mean" ? rep.vs_mean_all : rep.vs_model;
        out << "index,name,deviation,excluded_flag\n";
        for (const auto& e : res.deviations)
            out << e.index << ',' << csv_field(e.name) << ',' << format_double(e.deviation) << ','
                << (rep.dataset.is_excluded(e.index) ? 1 : 0) << '\n';
    } else {
        throw usage_error("unknown figure id '" + which + "'");
    }
}

inline void emit_rank_csv(const ResidualReport& res, std::ostream& out) {
    out << "rank,name,deviation\n";
    for (const auto& g : rank_groups(res))
        out << g.rank << ',' << csv_field(g.name) << ',' << format_double(g.deviation) << '\n';
}

inline void emit_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out) {
    out << "model,n_parameters,r_squared,sse,converged,error\n";
    for (const auto& row : rows)
        out << csv_field(row.model) << ',' << row.n_parameters << ',' << format_double(row.r_squared) << ','
            << format_double(row.sse) << ',' << (row.converged ? 1 : 0) << ',' << csv_field(row.error)
            << '\n';
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open output file '" + path + "'", "write");
    out << body;
    if (!out) throw io_error("failed writing '" + path + "'", "write");
}

inline std::string json_to_string(const json& j) {
    std::ostringstream ss;
    j.write(ss);
    ss << '\n';
    return ss.str();
}

}  // namespace critmass
