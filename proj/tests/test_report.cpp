#include "catch.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "critmass/report.hpp"
#include "helpers.hpp"

using namespace critmass;
using Catch::Matchers::WithinAbs;

namespace {

RunConfig fixture_config() {
    RunConfig cfg;
    cfg.input = testutil::data_path("rae2008_stats_or.csv");
    cfg.exclusions = {"#9"};
    cfg.mode = continuity_mode::continuous;
    cfg.resamples = 500;
    cfg.seed = 1;
    return cfg;
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("doubles render compactly and non finite values become null") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.0) == "-2");
    CHECK(format_double(1196.031881) == "1196.031881");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "null");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "null");
}

TEST_CASE("json writer escapes strings and keeps key order") {
    json j = json::object();
    j.set("b_first", json::integer(1));
    j.set("a_second", json::str("quote \" backslash \\ tab\t"));
    json arr = json::array();
    arr.push(json::number(std::numeric_limits<double>::quiet_NaN()));
    arr.push(json::boolean(true));
    arr.push(json::null());
    j.set("list", std::move(arr));
    const std::string text = json_to_string(j);
    CHECK(text.find("\"b_first\"") < text.find("\"a_second\""));
    CHECK(text.find("quote \\\" backslash \\\\ tab\\t") != std::string::npos);
    CHECK(text.find("null,\n") != std::string::npos);
    CHECK(text.back() == '\n');
    CHECK(json_to_string(json::object()) == "{}\n");
}

TEST_CASE("csv fields quote only when needed") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("with space") == "with space");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("headline formats the rounded mass with rounded up error") {
    CriticalMasses m{8.77, 17.54, 2.52, 5.04};
    CHECK(headline_mass(m) == "N_k = 9 ± 3");
    CriticalMasses exact{8.77, 17.54, std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN()};
    CHECK(headline_mass(exact) == "N_k = 9");
}

TEST_CASE("exclusion selectors accept names and indices") {
    Dataset ds = testutil::load_fixture();
    Dataset a = apply_exclusions(ds, {"#9"});
    CHECK(a.is_excluded(9));
    Dataset b = apply_exclusions(ds, {"Oxford", "#1"});
    CHECK(b.active_count() == 28);
    CHECK_THROWS_AS(apply_exclusions(ds, {"#"}), usage_error);
    CHECK_THROWS_AS(apply_exclusions(ds, {"#9x"}), usage_error);
    CHECK_THROWS_AS(apply_exclusions(ds, {"#99"}), lookup_error);
    CHECK_THROWS_AS(scheme_from_name("2011"), usage_error);
    CHECK_THROWS_AS(load_dataset_file("/nonexistent/in.csv", WeightScheme::scheme_2009()), io_error);
}

TEST_CASE("full analysis on the survey data produces a coherent report") {
    AnalysisReport rep = run_full_analysis(fixture_config());
    CHECK(rep.fit.n_active == 29);
    CHECK_THAT(rep.fit.breakpoint, WithinAbs(17.54159684, 5e-6));
    CHECK(rep.masses.lower == rep.fit.breakpoint / 2.0);
    CHECK(rep.classification.small + rep.classification.medium + rep.classification.large == 29);
    REQUIRE(rep.tests.size() == 4);
    CHECK(rep.tests[0].name == "no-correlation");
    CHECK(rep.tests[1].name == "zero-right-slope");
    CHECK(rep.tests[2].name == "slope-coincidence");
    CHECK(rep.tests[3].name == "normal-residuals");
    CHECK(rep.comparison.size() == 5);
    CHECK(rep.vs_mean_all.deviations.size() == 30);
    CHECK(rep.vs_mean_active.deviations.size() == 29);
    CHECK(rep.vs_model.deviations.size() == 29);
    REQUIRE(rep.band_grid.size() == 200);
    CHECK(rep.band_grid.front() == 2.0);
    CHECK(rep.band_grid.back() == 28.9);

    const std::string text = json_to_string(full_report_json(rep));
    for (const char* key : {"\"config\"", "\"dataset\"", "\"fit\"", "\"parameters\"",
                            "\"standard_errors\"", "\"critical_masses\"", "\"headline\"",
                            "\"classification_counts\"", "\"excluded\"", "\"tests\"", "\"comparison\"",
                            "\"residuals\"", "\"vs_mean_active\"", "\"leverage\"",
                            "\"outlier_candidate\"", "\"degenerate_resamples\""})
        CHECK(text.find(key) != std::string::npos);
    CHECK(text.find("\"n_active\": 29") != std::string::npos);
    CHECK(text.find("\"name\": \"Joint submission: Edinburgh & Heriot-Watt\"") != std::string::npos);

    // The same configuration reproduces the same bytes.
    AnalysisReport again = run_full_analysis(fixture_config());
    CHECK(json_to_string(full_report_json(again)) == text);
    std::ostringstream p1, p2;
    emit_plot_data(rep, "fit", p1);
    emit_plot_data(again, "fit", p2);
    CHECK(p1.str() == p2.str());
}

TEST_CASE("plot data emitters follow the figure contracts") {
    AnalysisReport rep = run_full_analysis(fixture_config());

    std::ostringstream scatter;
    emit_plot_data(rep, "scatter", scatter);
    CHECK(count_lines(scatter.str()) == 31);
    CHECK(scatter.str().rfind("N,s,excluded_flag\n", 0) == 0);
    CHECK(scatter.str().find("30,31.43,1") != std::string::npos);

    std::ostringstream fitcsv;
    emit_plot_data(rep, "fit", fitcsv);
    CHECK(count_lines(fitcsv.str()) == 201);
    std::istringstream rows(fitcsv.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line == "N_grid,prediction,band_lo,band_hi");
    while (std::getline(rows, line)) {
        double n, pred, lo, hi;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &n, &pred, &lo, &hi) == 4);
        CHECK(lo <= pred + 1e-9);
        CHECK(pred <= hi + 1e-9);
    }

    std::ostringstream rm, rmod;
    emit_plot_data(rep, "rank-mean", rm);
    emit_plot_data(rep, "rank-model", rmod);
    CHECK(count_lines(rm.str()) == 31);
    CHECK(count_lines(rmod.str()) == 30);
    CHECK(rmod.str().find(",1\n") == std::string::npos);  // excluded record absent entirely

    std::ostringstream bad;
    CHECK_THROWS_AS(emit_plot_data(rep, "pie-chart", bad), usage_error);

    std::ostringstream rank;
    emit_rank_csv(rep.vs_model, rank);
    CHECK(rank.str().rfind("rank,name,deviation\n", 0) == 0);
    CHECK(rank.str().find("1,Oxford,") != std::string::npos);

    std::ostringstream cmp;
    emit_comparison_csv(rep.comparison, cmp);
    CHECK(count_lines(cmp.str()) == 6);
    CHECK(cmp.str().rfind("model,n_parameters,r_squared,sse,converged,error\n", 0) == 0);
}

TEST_CASE("leverage reports the largest active record") {
    AnalysisReport rep = run_full_analysis(fixture_config());
    CHECK(rep.leverage_index == 26);
    CHECK(rep.leverage_name == "Southampton");
    CHECK_THAT(rep.leverage_mean_hat, WithinAbs(3.0 / 29.0, 1e-9));
    CHECK_THAT(rep.leverage_hat, WithinAbs(0.53201758, 1e-4));
    CHECK(rep.leverage_flag);
}

TEST_CASE("analysis configuration is validated up front") {
    RunConfig cfg = fixture_config();
    cfg.resamples = 50;
    CHECK_THROWS_AS(run_full_analysis(cfg), usage_error);
    cfg = fixture_config();
    cfg.level = 1.0;
    CHECK_THROWS_AS(run_full_analysis(cfg), usage_error);
    cfg = fixture_config();
    cfg.weights = "1999";
    CHECK_THROWS_AS(run_full_analysis(cfg), usage_error);
    cfg = fixture_config();
    cfg.input = "/nonexistent/in.csv";
    CHECK_THROWS_AS(run_full_analysis(cfg), io_error);
}
