#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "morph/pipeline.hpp"
#include "table_helpers.hpp"

using namespace morph;
using namespace morph::pipeline;
using njson = nlohmann::json;

namespace {

StatsConfig quick_config(AnalysisKind kind) {
    StatsConfig cfg;
    cfg.analysis = kind;
    cfg.seed = 4242;
    cfg.bootstrap_reps = 200;
    cfg.mc_reps = 200;
    return cfg;
}

njson run_parsed(const longi::MorphTable& table, const StatsConfig& cfg,
                 PlotSeries* plots = nullptr) {
    const auto report = run_stats(table, cfg, plots);
    return njson::parse(report.dump());
}

} // namespace

TEST_CASE("summary report carries the descriptive block per cell and group") {
    const auto table = testutil::synthetic_table(26, 18, 1);
    const auto r = run_parsed(table, quick_config(AnalysisKind::summary));
    CHECK(r["report_version"] == 1);
    CHECK(r["config"]["cdr0"] == 26);
    CHECK(r["config"]["cdr05"] == 18);
    const auto& cell = r["analyses"]["summary"]["distance"]["LB"];
    for (const char* grp : {"CDR0", "CDR0.5", "overall"}) {
        const auto& blk = cell[grp];
        CHECK(blk["n"].get<int>() >= 18);
        for (const char* k : {"mean", "sd", "min", "q1", "median", "q3", "max"})
            CHECK(blk.contains(k));
        CHECK(blk["min"].get<double>() <= blk["q1"].get<double>());
        CHECK(blk["q1"].get<double>() <= blk["median"].get<double>());
        CHECK(blk["median"].get<double>() <= blk["q3"].get<double>());
        CHECK(blk["q3"].get<double>() <= blk["max"].get<double>());
    }
    CHECK(r["analyses"]["subjects"]["subjects"] == 44);
}

TEST_CASE("repeated analysis emits the model-selection table and plot data") {
    const auto table = testutil::synthetic_table(26, 18, 2);
    auto cfg = quick_config(AnalysisKind::repeated);
    cfg.measure = MeasureSel::distance;
    PlotSeries plots;
    const auto r = run_parsed(table, cfg, &plots);

    const auto& sel = r["analyses"]["repeated"]["distance"]["model_selection"];
    REQUIRE(sel.size() == 4);
    std::map<std::string, int> k_by;
    for (const auto& row : sel) {
        k_by[row["covariance"].get<std::string>()] = row["k"].get<int>();
        const double aic = row["aic"].get<double>();
        const double ll = row["logLik"].get<double>();
        CHECK(aic == doctest::Approx(-2.0 * ll + 2.0 * row["k"].get<double>()));
    }
    CHECK(k_by["CS"] == 10);
    CHECK(k_by["AR1"] == 10);
    CHECK(k_by["ARH1"] == 13);
    CHECK(k_by["UN"] == 18);

    // the group x timepoint model of Eq-6 shape reports per-term F tests
    const auto& dt = r["analyses"]["repeated"]["distance"]["group_time_cs"];
    REQUIRE(dt["f_tests"].size() == 3);

    REQUIRE(plots.size() == 1);
    CHECK(plots[0].first == "interaction_distance.csv");
    CHECK(plots[0].second.find("CDR0.5,F,") != std::string::npos);
}

TEST_CASE("posthoc and cdf sections carry the comparison battery") {
    const auto table = testutil::synthetic_table(13, 9, 3);
    auto cfg = quick_config(AnalysisKind::posthoc);
    cfg.measure = MeasureSel::distance;
    const auto r = run_parsed(table, cfg);
    const auto& indep = r["analyses"]["posthoc"]["distance"]["independent"];
    REQUIRE(indep.size() == 4);
    for (const auto& row : indep) {
        for (const char* m : {"t_test", "wilcoxon", "brown_forsythe", "lilliefors_cdr0"}) {
            const double p = row[m]["p_two_sided"].get<double>();
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
    const auto& dep = r["analyses"]["posthoc"]["distance"]["dependent"];
    REQUIRE(dep.size() == 8);

    auto cfg2 = quick_config(AnalysisKind::cdf);
    cfg2.measure = MeasureSel::distance;
    PlotSeries plots;
    const auto r2 = run_parsed(table, cfg2, &plots);
    REQUIRE(r2["analyses"]["cdf"]["distance"].size() == 4);
    CHECK(plots.size() == 4);
    for (const auto& [name, content] : plots) {
        CHECK(name.find("cdf_distance_") == 0);
        CHECK(content.find("group,value,ecdf") == 0);
    }
}

TEST_CASE("pca section mirrors the loadings tables") {
    const auto table = testutil::synthetic_table(16, 12, 4);
    const auto r = run_parsed(table, quick_config(AnalysisKind::pca));
    const auto& pca = r["analyses"]["pca"];
    REQUIRE(pca.size() == 8); // 2 sides x 2 timepoints x 2 modes
    for (const auto& entry : pca) {
        const auto pv = entry["prop_var"].get<std::vector<double>>();
        double sum = 0.0;
        for (double p : pv) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(entry["loadings"].contains("HV"));
        CHECK(entry["loadings"].contains("ICV"));
    }
}

TEST_CASE("logistic section carries the model suite and matrices") {
    const auto table = testutil::synthetic_table(26, 18, 5);
    auto cfg = quick_config(AnalysisKind::logistic);
    cfg.measure = MeasureSel::distance;
    const auto r = run_parsed(table, cfg);
    const auto& sec = r["analyses"]["logistic"]["distance"];

    const auto& a = sec["M_II"]["matrix_A"];
    CHECK(a["t_cdr0"].get<int>() + a["f_cdr0"].get<int>() + a["f_cdr05"].get<int>() +
              a["t_cdr05"].get<int>() ==
          176);
    const auto& b = sec["M_II"]["matrix_B"];
    CHECK(b["t_cdr0"].get<int>() + b["f_cdr0"].get<int>() + b["f_cdr05"].get<int>() +
              b["t_cdr05"].get<int>() ==
          44);
    CHECK(sec["M_II"]["loocv"].contains("ccr"));
    CHECK(sec["M_III"].contains("matrix_C"));
    CHECK(sec["M_IV"].contains("matrix_D"));
    CHECK(sec["M_IV"].contains("cell"));
    for (const char* rate :
         {"p_half", "p_prior", "c1_w1_1_w2_1", "c1_w1_1_w2_3", "c2_eta_50_50",
          "c2_eta_30_70"}) {
        CHECK(sec["M_II"]["rates"].contains(rate));
    }
    const auto& opt = sec["M_II"]["rates"]["c1_w1_1_w2_1"];
    CHECK(opt["p_lo"].get<double>() >= 0.0);
    CHECK(opt["p_hi"].get<double>() <= 1.0);
}

TEST_CASE("apc section evaluates the rate formulas per subject") {
    const auto table = testutil::synthetic_table(6, 5, 6);
    const auto r = run_parsed(table, quick_config(AnalysisKind::apc));
    const auto& sec = r["analyses"]["apc"];
    const auto& rows = sec["records"];
    REQUIRE(rows.size() == 11);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = table.subjects[i];
        const double expect =
            (rec.hippo_volume[0][0] - rec.hippo_volume[0][1]) /
            (rec.hippo_volume[0][0] * rec.scan_interval_years) * 100.0;
        CHECK(rows[i]["v_apc_left"].get<double>() == doctest::Approx(expect).epsilon(1e-12));
        const double dexpect =
            (rec.metric_distance[1][1] - rec.metric_distance[1][0]) /
            (rec.metric_distance[1][0] * rec.scan_interval_years) * 100.0;
        CHECK(rows[i]["d_apc_right"].get<double>() ==
              doctest::Approx(dexpect).epsilon(1e-12));
    }
    CHECK(sec["volume"]["group_side_cs"].contains("f_tests"));
    CHECK(sec["logistic_v_apc"].contains("rates"));
}

TEST_CASE("apc hand row: 2000 to 1800 over two years is 5 percent per year") {
    auto table = testutil::synthetic_table(3, 3, 8);
    auto& rec = table.subjects[0];
    rec.scan_interval_years = 2.0;
    rec.hippo_volume[0][0] = 2000.0;
    rec.hippo_volume[0][1] = 1800.0;
    const auto r = run_parsed(table, quick_config(AnalysisKind::apc));
    CHECK(r["analyses"]["apc"]["records"][0]["v_apc_left"].get<double>() ==
          doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("full reports are byte-identical across reruns with the same seed") {
    const auto table = testutil::synthetic_table(10, 8, 7);
    auto cfg = quick_config(AnalysisKind::full);
    cfg.bootstrap_reps = 50;
    cfg.mc_reps = 50;
    PlotSeries p1, p2;
    const std::string a = run_stats(table, cfg, &p1).dump(2);
    const std::string b = run_stats(table, cfg, &p2).dump(2);
    CHECK(a == b);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].first == p2[i].first);
        CHECK(p1[i].second == p2[i].second);
    }

    // a different seed must change at least the bootstrap p-values somewhere
    cfg.seed = 4343;
    const std::string c = run_stats(table, cfg, nullptr).dump(2);
    CHECK(a != c);
}

TEST_CASE("seed requirements by analysis") {
    CHECK(needs_seed(AnalysisKind::cdf));
    CHECK(needs_seed(AnalysisKind::posthoc));
    CHECK(needs_seed(AnalysisKind::full));
    CHECK_FALSE(needs_seed(AnalysisKind::summary));
    CHECK_FALSE(needs_seed(AnalysisKind::pca));
    CHECK_FALSE(needs_seed(AnalysisKind::repeated));
}
