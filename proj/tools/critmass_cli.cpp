#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "critmass/critmass.hpp"

namespace {

using namespace critmass;

struct CommonOpts {
    std::string input;
    std::vector<std::string> exclude;
    std::string weights = "2009";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--input", opts.input, "input dataset (CSV or TSV)")->required();
    cmd->add_option("--exclude", opts.exclude, "record to exclude, by name or #index (repeatable)");
    cmd->add_option("--weights", opts.weights, "funding weight scheme")->check(CLI::IsMember({"2009", "2010"}));
}

Dataset load_common(const CommonOpts& opts) {
    return apply_exclusions(load_dataset_file(opts.input, scheme_from_name(opts.weights)), opts.exclude);
}

continuity_mode parse_mode(const std::string& mode) {
    return mode == "continuous" ? continuity_mode::continuous : continuity_mode::free;
}

void deliver(const std::string& out_path, const std::string& body) {
    if (out_path.empty())
        std::cout << body;
    else
        write_text_file(out_path, body);
}

void run_fit(const CommonOpts& common, const std::string& mode, int resamples, std::uint64_t seed,
             double band, const std::string& out, const std::string& plot_data) {
    RunConfig cfg;
    cfg.input = common.input;
    cfg.weights = common.weights;
    cfg.exclusions = common.exclude;
    cfg.mode = parse_mode(mode);
    cfg.resamples = resamples;
    cfg.seed = seed;
    cfg.level = band;
    AnalysisReport rep = run_full_analysis(cfg);
    deliver(out, json_to_string(fit_json(rep)));
    if (!plot_data.empty()) {
        std::ostringstream ss;
        emit_plot_data(rep, "fit", ss);
        write_text_file(plot_data, ss.str());
    }
}

void run_report(const CommonOpts& common, const std::string& mode, int resamples, std::uint64_t seed,
                double band, const std::string& out, const std::string& plot_dir) {
    RunConfig cfg;
    cfg.input = common.input;
    cfg.weights = common.weights;
    cfg.exclusions = common.exclude;
    cfg.mode = parse_mode(mode);
    cfg.resamples = resamples;
    cfg.seed = seed;
    cfg.level = band;
    AnalysisReport rep = run_full_analysis(cfg);
    deliver(out, json_to_string(full_report_json(rep)));
    if (!plot_dir.empty()) {
        for (const char* fig : {"scatter", "fit", "rank-mean", "rank-model"}) {
            std::ostringstream ss;
            emit_plot_data(rep, fig, ss);
            write_text_file(plot_dir + "/" + fig + ".csv", ss.str());
        }
    }
}

void run_test(const CommonOpts& common, const std::string& which, const std::string& mode, int resamples,
              std::uint64_t seed, bool seed_set, const std::string& out) {
    Dataset ds = load_common(common);
    PiecewiseFit fit = fit_piecewise(ds, parse_mode(mode));
    const bool want_slopes = which == "all" || which == "slopes";
    if (want_slopes) {
        if (!seed_set) throw usage_error("--seed is required for the slope-coincidence test");
        bootstrap_errors(fit, ds, resamples, seed);
    }
    std::vector<TestResult> selected;
    if (which == "all" || which == "nocorr") selected.push_back(test_no_correlation(ds));
    if (which == "all" || which == "rightflat") selected.push_back(test_zero_right_slope(ds, fit));
    if (want_slopes) selected.push_back(test_equal_slopes(fit));
    if (which == "all" || which == "ks") selected.push_back(ks_normality(fit.residuals));
    json j = json::object();
    j.set("tests", tests_json(selected));
    deliver(out, json_to_string(j));
}

void run_compare(const CommonOpts& common, const std::string& mode, const std::string& out) {
    Dataset ds = load_common(common);
    auto rows = compare_ansaetze(ds, parse_mode(mode));
    const bool csv = out.size() >= 4 && out.compare(out.size() - 4, 4, ".csv") == 0;
    if (csv) {
        std::ostringstream ss;
        emit_comparison_csv(rows, ss);
        write_text_file(out, ss.str());
    } else {
        json j = json::object();
        j.set("comparison", comparison_json(rows));
        deliver(out, json_to_string(j));
    }
}

void run_rank(const CommonOpts& common, const std::string& mode, const std::string& fit_mode,
              const std::string& out, const std::string& plot_data) {
    Dataset ds = load_common(common);
    ResidualReport res;
    if (mode == "model") {
        PiecewiseFit fit = fit_piecewise(ds, parse_mode(fit_mode));
        res = residuals_vs_model(ds, fit);
    } else {
        res = residuals_vs_mean(ds, true);
    }
    std::ostringstream ranked;
    emit_rank_csv(res, ranked);
    deliver(out, ranked.str());
    if (!plot_data.empty()) {
        std::ostringstream ss;
        ss << "index,name,deviation,excluded_flag\n";
        for (const auto& e : res.deviations)
            ss << e.index << ',' << csv_field(e.name) << ',' << format_double(e.deviation) << ','
               << (ds.is_excluded(e.index) ? 1 : 0) << '\n';
        write_text_file(plot_data, ss.str());
    }
}

std::vector<double> parse_sizes(const std::string& spec) {
    if (spec.rfind("file:", 0) == 0) {
        const std::string path = spec.substr(5);
        std::ifstream in(path);
        if (!in) throw io_error("cannot open sizes file '" + path + "'");
        std::vector<double> sizes;
        double v;
        while (in >> v) sizes.push_back(v);
        if (sizes.empty()) throw validation_error("sizes file '" + path + "' holds no numbers", "load");
        return sizes;
    }
    if (spec.rfind("range:", 0) == 0) {
        double start = 0, stop = 0, step = 0;
        if (std::sscanf(spec.c_str() + 6, "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0 ||
            stop < start)
            throw usage_error("bad range '" + spec + "' (expected range:START:STOP:STEP)");
        std::vector<double> sizes;
        for (double v = start; v <= stop + 1e-9; v += step) sizes.push_back(v);
        return sizes;
    }
    throw usage_error("--sizes expects file:PATH or range:START:STOP:STEP");
}

void run_simulate(double a, double b, double c, double nc, double noise, const std::string& sizes_spec,
                  std::uint64_t seed, const std::string& out) {
    MicroParams params;
    params.a = a;
    params.b = b;
    params.c = c;
    params.n_c = nc;
    params.noise_sd = noise;
    params.seed = seed;
    Dataset ds = generate_dataset(parse_sizes(sizes_spec), params);
    std::ostringstream ss;
    serialize(ds, ss);
    deliver(out, ss.str());
}

void emit_error(const std::string& stage, const std::string& message) {
    json j = json::object();
    json e = json::object();
    e.set("stage", json::str(stage));
    e.set("message", json::str(message));
    j.set("error", std::move(e));
    std::cout << json_to_string(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Critical-mass analysis of research-group quality data"};
    app.require_subcommand(1);

    CommonOpts fit_common, test_common, compare_common, rank_common, report_common;
    std::string fit_mode = "free", fit_out, fit_plot;
    int fit_resamples = 10000;
    std::uint64_t fit_seed = 0;
    double fit_band = 0.95;
    auto* fit_cmd = app.add_subcommand("fit", "two-segment fit with bootstrap uncertainties");
    add_common(fit_cmd, fit_common);
    fit_cmd->add_option("--mode", fit_mode, "segment continuity")->check(CLI::IsMember({"free", "continuous"}));
    fit_cmd->add_option("--resamples", fit_resamples, "bootstrap resamples (minimum 200)");
    fit_cmd->add_option("--seed", fit_seed, "bootstrap seed")->required();
    fit_cmd->add_option("--band", fit_band, "confidence band level");
    fit_cmd->add_option("--out", fit_out, "report JSON path (stdout when omitted)");
    fit_cmd->add_option("--plot-data", fit_plot, "fit-line band CSV path");

    std::string test_which = "all", test_mode = "free", test_out;
    int test_resamples = 10000;
    std::uint64_t test_seed = 0;
    auto* test_cmd = app.add_subcommand("test", "hypothesis tests on the fitted model");
    add_common(test_cmd, test_common);
    test_cmd->add_option("--which", test_which, "test selection")
        ->check(CLI::IsMember({"all", "nocorr", "slopes", "rightflat", "ks"}));
    test_cmd->add_option("--mode", test_mode, "segment continuity")
        ->check(CLI::IsMember({"free", "continuous"}));
    test_cmd->add_option("--resamples", test_resamples, "bootstrap resamples for the slope test");
    auto* test_seed_opt = test_cmd->add_option("--seed", test_seed, "bootstrap seed for the slope test");
    test_cmd->add_option("--out", test_out, "tests JSON path (stdout when omitted)");

    std::string compare_mode = "free", compare_out;
    auto* compare_cmd = app.add_subcommand("compare", "ansatz comparison table");
    add_common(compare_cmd, compare_common);
    compare_cmd->add_option("--mode", compare_mode, "continuity for the piecewise row")
        ->check(CLI::IsMember({"free", "continuous"}));
    compare_cmd->add_option("--out", compare_out, "table path; .csv extension selects CSV");

    std::string rank_mode = "mean", rank_fit_mode = "free", rank_out, rank_plot;
    auto* rank_cmd = app.add_subcommand("rank", "size-adjusted ranking by residual");
    add_common(rank_cmd, rank_common);
    rank_cmd->add_option("--mode", rank_mode, "deviation baseline")->check(CLI::IsMember({"mean", "model"}));
    rank_cmd->add_option("--fit-mode", rank_fit_mode, "segment continuity for model mode")
        ->check(CLI::IsMember({"free", "continuous"}));
    rank_cmd->add_option("--out", rank_out, "ranking CSV path (stdout when omitted)");
    rank_cmd->add_option("--plot-data", rank_plot, "deviation CSV path");

    double sim_a = 0, sim_b = 0, sim_c = 0, sim_nc = 0, sim_noise = 0;
    std::string sim_sizes, sim_out;
    std::uint64_t sim_seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "synthetic data from the strength model");
    sim_cmd->add_option("--a", sim_a, "mean individual strength")->required();
    sim_cmd->add_option("--b", sim_b, "mean pairwise interaction strength")->required();
    sim_cmd->add_option("--c", sim_c, "mean inter-subgroup interaction strength");
    sim_cmd->add_option("--nc", sim_nc, "fragmentation cutoff")->required();
    sim_cmd->add_option("--noise", sim_noise, "quality noise sd");
    sim_cmd->add_option("--sizes", sim_sizes, "file:PATH or range:START:STOP:STEP")->required();
    sim_cmd->add_option("--seed", sim_seed, "noise seed")->required();
    sim_cmd->add_option("--out", sim_out, "synthetic CSV path (stdout when omitted)");

    std::string report_mode = "free", report_out, report_plot_dir;
    int report_resamples = 10000;
    std::uint64_t report_seed = 0;
    double report_band = 0.95;
    auto* report_cmd = app.add_subcommand("report", "full analysis report");
    add_common(report_cmd, report_common);
    report_cmd->add_option("--mode", report_mode, "segment continuity")
        ->check(CLI::IsMember({"free", "continuous"}));
    report_cmd->add_option("--resamples", report_resamples, "bootstrap resamples (minimum 200)");
    report_cmd->add_option("--seed", report_seed, "bootstrap seed")->required();
    report_cmd->add_option("--band", report_band, "confidence band level");
    report_cmd->add_option("--out", report_out, "report JSON path (stdout when omitted)");
    report_cmd->add_option("--plot-dir", report_plot_dir, "directory for figure CSVs");

    try {
        app.parse(argc, argv);
        if (fit_cmd->parsed())
            run_fit(fit_common, fit_mode, fit_resamples, fit_seed, fit_band, fit_out, fit_plot);
        else if (test_cmd->parsed())
            run_test(test_common, test_which, test_mode, test_resamples, test_seed,
                     test_seed_opt->count() > 0, test_out);
        else if (compare_cmd->parsed())
            run_compare(compare_common, compare_mode, compare_out);
        else if (rank_cmd->parsed())
            run_rank(rank_common, rank_mode, rank_fit_mode, rank_out, rank_plot);
        else if (sim_cmd->parsed())
            run_simulate(sim_a, sim_b, sim_c, sim_nc, sim_noise, sim_sizes, sim_seed, sim_out);
        else if (report_cmd->parsed())
            run_report(report_common, report_mode, report_resamples, report_seed, report_band, report_out,
                       report_plot_dir);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const critmass::error& e) {
        emit_error(e.stage, e.what());
        return e.exit_code;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 0;
}
