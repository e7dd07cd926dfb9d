#include "morph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "morph/discrimination.hpp"
#include "morph/errors.hpp"
#include "morph/mixed_models.hpp"
#include "morph/pca.hpp"
#include "morph/rng.hpp"
#include "morph/stat_tests.hpp"

namespace morph::pipeline {

using longi::Group;
using longi::Measure;
using longi::MorphTable;
using longi::Side;
using longi::Timepoint;

AnalysisKind analysis_from_string(const std::string& s) {
    if (s == "summary") return AnalysisKind::summary;
    if (s == "repeated") return AnalysisKind::repeated;
    if (s == "posthoc") return AnalysisKind::posthoc;
    if (s == "correlations") return AnalysisKind::correlations;
    if (s == "cdf") return AnalysisKind::cdf;
    if (s == "pca") return AnalysisKind::pca;
    if (s == "logistic") return AnalysisKind::logistic;
    if (s == "apc") return AnalysisKind::apc;
    if (s == "full") return AnalysisKind::full;
    throw InvalidParameter("unknown analysis: " + s);
}

const char* to_string(AnalysisKind a) {
    switch (a) {
        case AnalysisKind::summary: return "summary";
        case AnalysisKind::repeated: return "repeated";
        case AnalysisKind::posthoc: return "posthoc";
        case AnalysisKind::correlations: return "correlations";
        case AnalysisKind::cdf: return "cdf";
        case AnalysisKind::pca: return "pca";
        case AnalysisKind::logistic: return "logistic";
        case AnalysisKind::apc: return "apc";
        case AnalysisKind::full: return "full";
    }
    return "?";
}

const char* to_string(MeasureSel m) {
    switch (m) {
        case MeasureSel::distance: return "distance";
        case MeasureSel::volume: return "volume";
        case MeasureSel::both: return "both";
    }
    return "?";
}

bool needs_seed(AnalysisKind a) {
    switch (a) {
        case AnalysisKind::posthoc:
        case AnalysisKind::cdf:
        case AnalysisKind::full:
            return true;
        default:
            return false;
    }
}

namespace {

const std::array<std::pair<Side, Timepoint>, 4> kCells = {{
    {Side::left, Timepoint::baseline},
    {Side::left, Timepoint::followup},
    {Side::right, Timepoint::baseline},
    {Side::right, Timepoint::followup},
}};

std::string cell_label(Side s, Timepoint t) {
    return std::string(longi::to_string(s)) + longi::to_string(t);
}

double cell_value(const longi::SubjectRecord& r, Measure m, Side s, Timepoint t) {
    return m == Measure::distance ? r.distance(s, t) : r.volume(s, t);
}

std::vector<double> cell_values(const MorphTable& table, Measure m, Side s, Timepoint t) {
    std::vector<double> v;
    for (const auto& rec : table.subjects) v.push_back(cell_value(rec, m, s, t));
    return v;
}

std::vector<double> cell_values(const MorphTable& table, Measure m, Side s, Timepoint t,
                                Group g) {
    std::vector<double> v;
    for (const auto& rec : table.subjects)
        if (rec.group == g) v.push_back(cell_value(rec, m, s, t));
    return v;
}

double quantile_type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = double(v.size() - 1) * p;
    const std::size_t lo = std::size_t(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - double(lo)) * (v[lo + 1] - v[lo]);
}

json::Value describe(const std::vector<double>& v) {
    json::Value o = json::Value::object();
    const std::size_t n = v.size();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(n);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = n > 1 ? var / double(n - 1) : 0.0;
    o["n"] = json::integer(std::int64_t(n));
    o["mean"] = json::num(mean);
    o["sd"] = json::num(std::sqrt(var));
    o["min"] = json::num(*std::min_element(v.begin(), v.end()));
    o["q1"] = json::num(quantile_type7(v, 0.25));
    o["median"] = json::num(quantile_type7(v, 0.5));
    o["q3"] = json::num(quantile_type7(v, 0.75));
    o["max"] = json::num(*std::max_element(v.begin(), v.end()));
    return o;
}

json::Value test_json(const stats::TestResult& t) {
    json::Value o = json::Value::object();
    o["method"] = json::str(t.method);
    o["statistic"] = json::num(t.statistic);
    o["p_two_sided"] = json::num(t.p_two_sided);
    o["p_less"] = t.p_less ? json::num(*t.p_less) : json::Value();
    o["p_greater"] = t.p_greater ? json::num(*t.p_greater) : json::Value();
    json::Value narr = json::Value::array();
    for (std::size_t s : t.n) narr.push_back(json::integer(std::int64_t(s)));
    o["n"] = std::move(narr);
    o["exact"] = json::boolean(t.exact);
    o["significant"] = json::boolean(t.p_two_sided <= 0.05);
    return o;
}

json::Value fit_json(const mixed::MixedModelFit& f) {
    json::Value o = json::Value::object();
    o["covariance"] = json::str(mixed::to_string(f.cov.kind));
    o["k"] = json::integer(std::int64_t(f.k));
    o["logLik"] = json::num(f.logLik);
    o["aic"] = json::num(f.aic);
    o["bic"] = json::num(f.bic);
    json::Value beta = json::Value::object();
    for (const auto& b : f.beta) beta[b.label] = json::num(b.estimate);
    o["beta"] = std::move(beta);
    o["cov_params"] = json::num_array(f.cov.params);
    json::Value ft = json::Value::array();
    for (const auto& t : mixed::f_tests(f)) {
        json::Value row = json::Value::object();
        row["term"] = json::str(t.term);
        row["F"] = json::num(t.F);
        row["num_df"] = json::num(t.num_df);
        row["den_df"] = json::num(t.den_df);
        row["p"] = json::num(t.p);
        ft.push_back(std::move(row));
    }
    o["f_tests"] = std::move(ft);
    return o;
}

json::Value confusion_json(const disc::ConfusionSummary& c) {
    json::Value o = json::Value::object();
    o["t_cdr0"] = json::integer(c.t_cdr0);
    o["f_cdr0"] = json::integer(c.f_cdr0);
    o["f_cdr05"] = json::integer(c.f_cdr05);
    o["t_cdr05"] = json::integer(c.t_cdr05);
    o["ccr"] = json::num(c.ccr);
    o["sensitivity"] = json::num(c.sensitivity);
    o["specificity"] = json::num(c.specificity);
    o["ccr_pct"] = json::integer(disc::percent_round(c.ccr));
    o["sensitivity_pct"] = json::integer(disc::percent_round(c.sensitivity));
    o["specificity_pct"] = json::integer(disc::percent_round(c.specificity));
    return o;
}

mixed::RepeatedData repeated_from_long(const std::vector<longi::LongRow>& rows) {
    mixed::RepeatedData d;
    d.m = 4;
    d.n_subjects = rows.size() / 4;
    d.pos = {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
    d.y.resize(rows.size());
    d.group.resize(d.n_subjects);
    for (std::size_t i = 0; i < rows.size(); ++i) d.y[i] = rows[i].value;
    for (std::size_t k = 0; k < d.n_subjects; ++k)
        d.group[k] = rows[k * 4].group == Group::cdr05 ? 1 : 0;
    return d;
}

// ---------------------------------------------------------------------- summary

json::Value summary_analysis(const MorphTable& table, Measure m) {
    json::Value out = json::Value::object();
    for (const auto& [s, t] : kCells) {
        json::Value cell = json::Value::object();
        cell["CDR0"] = describe(cell_values(table, m, s, t, Group::cdr0));
        cell["CDR0.5"] = describe(cell_values(table, m, s, t, Group::cdr05));
        cell["overall"] = describe(cell_values(table, m, s, t));
        out[cell_label(s, t)] = std::move(cell);
    }
    return out;
}

json::Value subjects_summary(const MorphTable& table) {
    json::Value o = json::Value::object();
    o["subjects"] = json::integer(std::int64_t(table.size()));
    o["cdr0"] = json::integer(std::int64_t(table.count(Group::cdr0)));
    o["cdr05"] = json::integer(std::int64_t(table.count(Group::cdr05)));
    std::vector<double> age, interval, education;
    for (const auto& r : table.subjects) {
        age.push_back(r.age_years);
        interval.push_back(r.scan_interval_years);
        education.push_back(r.education_years);
    }
    o["age_years"] = describe(age);
    o["scan_interval_years"] = describe(interval);
    o["education_years"] = describe(education);
    return o;
}

// --------------------------------------------------------------------- repeated

json::Value repeated_analysis(const MorphTable& table, Measure m, PlotSeries* plots) {
    const auto rows = longi::to_long(table, m);
    const auto data = repeated_from_long(rows);

    json::Value out = json::Value::object();

    mixed::ModelSpec dt;
    dt.terms = {mixed::kD, mixed::kT, mixed::kD | mixed::kT};
    out["group_time_cs"] = fit_json(mixed::fit(data, dt, mixed::CovKind::cs));

    mixed::ModelSpec st;
    st.terms = {mixed::kS, mixed::kT, mixed::kS | mixed::kT};
    out["side_time_cs"] = fit_json(mixed::fit(data, st, mixed::CovKind::cs));

    const mixed::ModelSpec full = mixed::ModelSpec::full_factorial(mixed::kD | mixed::kS |
                                                                   mixed::kT);
    std::vector<std::pair<mixed::CovKind, mixed::MixedModelFit>> fits;
    for (auto kind : {mixed::CovKind::cs, mixed::CovKind::un, mixed::CovKind::arh1,
                      mixed::CovKind::ar1})
        fits.emplace_back(kind, mixed::fit(data, full, kind));

    // BIC penalty uses k*ln(N) with N = long-format observations; the count
    // is echoed so the convention is explicit.
    out["bic_n"] = json::integer(std::int64_t(data.n_obs()));
    out["bic_n_convention"] = json::str("observations");

    json::Value cmp = json::Value::array();
    const mixed::MixedModelFit* un_fit = nullptr;
    for (const auto& [kind, f] : fits)
        if (kind == mixed::CovKind::un) un_fit = &f;
    for (const auto& [kind, f] : fits) {
        json::Value row = json::Value::object();
        row["covariance"] = json::str(mixed::to_string(kind));
        row["k"] = json::integer(std::int64_t(f.k));
        row["logLik"] = json::num(f.logLik);
        row["aic"] = json::num(f.aic);
        row["bic"] = json::num(f.bic);
        if (kind != mixed::CovKind::un && un_fit) {
            const auto l = mixed::lrt(f, *un_fit);
            json::Value lrt = json::Value::object();
            lrt["against"] = json::str("UN");
            lrt["statistic"] = json::num(l.statistic);
            lrt["df"] = json::integer(std::int64_t(l.df));
            lrt["p"] = json::num(l.p);
            row["lrt"] = std::move(lrt);
        }
        cmp.push_back(std::move(row));
    }
    out["model_selection"] = std::move(cmp);

    // pick by AIC; report its term tests
    const mixed::MixedModelFit* best = &fits.front().second;
    for (const auto& [kind, f] : fits)
        if (f.aic < best->aic) best = &f;
    out["selected"] = fit_json(*best);

    // sample Var-Cov of the four measures (for the report reader)
    {
        la::Mat d4(data.n_subjects, 4);
        for (std::size_t k = 0; k < data.n_subjects; ++k)
            for (std::size_t j = 0; j < 4; ++j) d4(k, j) = data.y[k * 4 + j];
        const la::Mat C = pca::sample_covariance(d4);
        json::Value cj = json::Value::array();
        for (std::size_t i = 0; i < 4; ++i) {
            json::Value rowj = json::Value::array();
            for (std::size_t j = 0; j < 4; ++j) rowj.push_back(json::num(C(i, j)));
            cj.push_back(std::move(rowj));
        }
        out["sample_cov"] = std::move(cj);
    }

    if (plots) {
        std::ostringstream csv;
        csv << "group,timepoint,mean,n\n";
        for (Group g : {Group::cdr0, Group::cdr05})
            for (Timepoint t : {Timepoint::baseline, Timepoint::followup}) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& rec : table.subjects) {
                    if (rec.group != g) continue;
                    for (Side s : {Side::left, Side::right}) {
                        sum += cell_value(rec, m, s, t);
                        ++n;
                    }
                }
                csv.precision(17);
                csv << longi::to_string(g) << ',' << longi::to_string(t) << ','
                    << (n ? sum / double(n) : 0.0) << ',' << n << '\n';
            }
        plots->emplace_back(std::string("interaction_") +
                                (m == Measure::distance ? "distance" : "volume") + ".csv",
                            csv.str());
    }
    return out;
}

// ---------------------------------------------------------------------- posthoc

json::Value posthoc_analysis(const MorphTable& table, Measure m, std::uint64_t seed,
                             int mc_reps, std::uint64_t& stream) {
    json::Value out = json::Value::object();

    json::Value indep = json::Value::array();
    for (const auto& [s, t] : kCells) {
        const auto x = cell_values(table, m, s, t, Group::cdr05);
        const auto y = cell_values(table, m, s, t, Group::cdr0);
        const std::string label =
            cell_label(s, t) + "-CDR0.5," + cell_label(s, t) + "-CDR0";
        json::Value row = json::Value::object();
        row["comparison"] = json::str(label);
        row["t_test"] = test_json(stats::t_test(x, y, stats::TTestMode::pooled));
        row["wilcoxon"] = test_json(stats::wilcoxon_rank_sum(x, y));
        row["lilliefors_cdr05"] =
            test_json(stats::lilliefors(x, Rng::derive(seed, stream++), mc_reps));
        row["lilliefors_cdr0"] =
            test_json(stats::lilliefors(y, Rng::derive(seed, stream++), mc_reps));
        row["brown_forsythe"] = test_json(stats::brown_forsythe(x, y));
        indep.push_back(std::move(row));
    }
    out["independent"] = std::move(indep);

    json::Value dep = json::Value::array();
    auto paired_row = [&](const std::string& label, const std::vector<double>& x,
                          const std::vector<double>& y) {
        json::Value row = json::Value::object();
        row["comparison"] = json::str(label);
        row["paired_t"] = test_json(stats::t_test(x, y, stats::TTestMode::paired));
        std::vector<double> d(x.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
        row["paired_wilcoxon"] = test_json(stats::wilcoxon_signed_rank(d));
        dep.push_back(std::move(row));
    };
    for (Group g : {Group::cdr05, Group::cdr0})
        for (Side s : {Side::left, Side::right}) {
            const auto b = cell_values(table, m, s, Timepoint::baseline, g);
            const auto f = cell_values(table, m, s, Timepoint::followup, g);
            paired_row(cell_label(s, Timepoint::baseline) + "-" + longi::to_string(g) + "," +
                           cell_label(s, Timepoint::followup) + "-" + longi::to_string(g),
                       b, f);
        }
    for (Group g : {Group::cdr05, Group::cdr0})
        for (Timepoint t : {Timepoint::baseline, Timepoint::followup}) {
            const auto l = cell_values(table, m, Side::left, t, g);
            const auto r = cell_values(table, m, Side::right, t, g);
            paired_row(cell_label(Side::left, t) + "-" + longi::to_string(g) + "," +
                           cell_label(Side::right, t) + "-" + longi::to_string(g),
                       l, r);
        }
    out["dependent"] = std::move(dep);
    return out;
}

// ----------------------------------------------------------------- correlations

json::Value correlations_analysis(const MorphTable& table, Measure m) {
    json::Value out = json::Value::array();
    auto corr_row = [&](const std::string& label, const std::vector<double>& x,
                        const std::vector<double>& y) {
        json::Value row = json::Value::object();
        row["comparison"] = json::str(label);
        row["pearson"] = test_json(
            stats::correlation(x, y, stats::CorrMethod::pearson, stats::Alternative::greater));
        row["spearman"] = test_json(stats::correlation(x, y, stats::CorrMethod::spearman,
                                                       stats::Alternative::greater));
        row["kendall"] = test_json(
            stats::correlation(x, y, stats::CorrMethod::kendall, stats::Alternative::greater));
        out.push_back(std::move(row));
    };

    // baseline vs follow-up, overall and by group
    for (Side s : {Side::left, Side::right}) {
        corr_row(cell_label(s, Timepoint::baseline) + "," + cell_label(s, Timepoint::followup),
                 cell_values(table, m, s, Timepoint::baseline),
                 cell_values(table, m, s, Timepoint::followup));
        for (Group g : {Group::cdr05, Group::cdr0})
            corr_row(cell_label(s, Timepoint::baseline) + "-" + longi::to_string(g) + "," +
                         cell_label(s, Timepoint::followup) + "-" + longi::to_string(g),
                     cell_values(table, m, s, Timepoint::baseline, g),
                     cell_values(table, m, s, Timepoint::followup, g));
    }
    // left vs right
    for (Timepoint t : {Timepoint::baseline, Timepoint::followup}) {
        corr_row(cell_label(Side::left, t) + "," + cell_label(Side::right, t),
                 cell_values(table, m, Side::left, t), cell_values(table, m, Side::right, t));
        for (Group g : {Group::cdr05, Group::cdr0})
            corr_row(cell_label(Side::left, t) + "-" + longi::to_string(g) + "," +
                         cell_label(Side::right, t) + "-" + longi::to_string(g),
                     cell_values(table, m, Side::left, t, g),
                     cell_values(table, m, Side::right, t, g));
    }
    return out;
}

// --------------------------------------------------------------------------- cdf

json::Value cdf_analysis(const MorphTable& table, Measure m, std::uint64_t seed,
                         int bootstrap_reps, std::uint64_t& stream, PlotSeries* plots) {
    json::Value out = json::Value::array();
    for (const auto& [s, t] : kCells) {
        const auto x = cell_values(table, m, s, t, Group::cdr05);
        const auto y = cell_values(table, m, s, t, Group::cdr0);
        json::Value row = json::Value::object();
        row["comparison"] =
            json::str(cell_label(s, t) + "-CDR0.5," + cell_label(s, t) + "-CDR0");
        row["ks_two_sided"] = test_json(stats::ks_two_sample(x, y));
        row["ks_less"] = test_json(stats::ks_two_sample(x, y, stats::Alternative::less));
        row["ks_greater"] = test_json(stats::ks_two_sample(x, y, stats::Alternative::greater));
        row["cramer"] = test_json(
            stats::cramer_test(x, y, bootstrap_reps, Rng::derive(seed, stream++)));
        row["cvm"] = test_json(
            stats::cvm_two_sample(x, y, bootstrap_reps, Rng::derive(seed, stream++)));
        out.push_back(std::move(row));

        if (plots) {
            std::ostringstream csv;
            csv << "group,value,ecdf\n";
            csv.precision(17);
            auto emit = [&](const char* gname, std::vector<double> v) {
                std::sort(v.begin(), v.end());
                for (std::size_t i = 0; i < v.size(); ++i)
                    csv << gname << ',' << v[i] << ',' << double(i + 1) / double(v.size())
                        << '\n';
            };
            emit("CDR0.5", x);
            emit("CDR0", y);
            plots->emplace_back(std::string("cdf_") +
                                    (m == Measure::distance ? "distance" : "volume") + "_" +
                                    cell_label(s, t) + ".csv",
                                csv.str());
        }
    }
    return out;
}

// --------------------------------------------------------------------------- pca

json::Value pca_analysis(const MorphTable& table) {
    json::Value out = json::Value::array();
    const std::array<std::string, 4> var_names = {"HV", "HM", "BV", "ICV"};
    for (Side s : {Side::left, Side::right})
        for (Timepoint t : {Timepoint::baseline, Timepoint::followup}) {
            la::Mat data(table.size(), 4);
            for (std::size_t i = 0; i < table.size(); ++i) {
                const auto& r = table.subjects[i];
                data(i, 0) = r.volume(s, t);
                data(i, 1) = r.distance(s, t);
                data(i, 2) = r.brain_volume[std::size_t(t)];
                data(i, 3) = r.icv[std::size_t(t)];
            }
            for (auto mode : {pca::PcaMode::covariance, pca::PcaMode::correlation}) {
                const auto res = pca::pca(data, mode);
                json::Value o = json::Value::object();
                o["side"] = json::str(longi::to_string(s));
                o["timepoint"] = json::str(longi::to_string(t));
                o["mode"] = json::str(mode == pca::PcaMode::covariance ? "covariance"
                                                                       : "correlation");
                o["prop_var"] = json::num_array(res.prop_var);
                o["cum_prop"] = json::num_array(res.cum_prop);
                json::Value loadings = json::Value::object();
                for (std::size_t v = 0; v < 4; ++v) {
                    std::vector<double> lrow(4);
                    for (std::size_t c = 0; c < 4; ++c) lrow[c] = res.loadings(v, c);
                    loadings[var_names[v]] = json::num_array(lrow);
                }
                o["loadings"] = std::move(loadings);
                out.push_back(std::move(o));
            }
        }
    return out;
}

// ---------------------------------------------------------------------- logistic

struct RateRow {
    std::string label;
    json::Value value;
};

json::Value rates_json(const disc::ConfusionSummary& c, double p_lo, double p_hi) {
    json::Value o = confusion_json(c);
    o["p_lo"] = json::num(p_lo);
    o["p_hi"] = json::num(p_hi);
    return o;
}

// Scores aggregated to subjects: a subject is positive at threshold p iff any
// of its rows is, so the subject score is the row maximum.
void subject_scores(const disc::Dataset& data, const std::vector<double>& probs,
                    std::vector<double>& scores, std::vector<int>& truth) {
    std::vector<int> ids(data.subject);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    scores.clear();
    truth.clear();
    for (int id : ids) {
        double best = 0.0;
        int y = 0;
        for (std::size_t i = 0; i < data.n(); ++i)
            if (data.subject[i] == id) {
                best = std::max(best, probs[i]);
                y = data.y[i];
            }
        scores.push_back(best);
        truth.push_back(y);
    }
}

json::Value model_report(const disc::Dataset& data, const std::vector<disc::Term>& terms,
                         const disc::LogisticFit& fit, bool aggregate, double prior_rate) {
    json::Value o = json::Value::object();
    json::Value tj = json::Value::array();
    for (const auto& t : terms) tj.push_back(json::str(t.label));
    o["terms"] = std::move(tj);
    json::Value coef = json::Value::object();
    for (std::size_t j = 0; j < fit.beta.size(); ++j) {
        json::Value c = json::Value::object();
        c["estimate"] = json::num(fit.beta[j]);
        c["se"] = json::num(fit.se[j]);
        c["z"] = json::num(fit.wald_z[j]);
        c["p"] = json::num(fit.wald_p[j]);
        coef[fit.labels[j]] = std::move(c);
    }
    o["coefficients"] = std::move(coef);
    o["deviance"] = json::num(fit.deviance);
    o["aic"] = json::num(fit.aic);
    o["separation"] = json::boolean(fit.separation);

    std::vector<double> scores;
    std::vector<int> truth;
    if (aggregate) {
        subject_scores(data, fit.fitted, scores, truth);
    } else {
        scores = fit.fitted;
        truth = data.y;
    }

    json::Value rates = json::Value::object();
    for (double p : {0.5, prior_rate}) {
        const auto c = disc::confusion(disc::classify(scores, p), truth);
        rates[p == 0.5 ? "p_half" : "p_prior"] = rates_json(c, p, p);
    }
    struct CostCase {
        const char* name;
        disc::CostSpec spec;
    };
    const CostCase cases[] = {
        {"c1_w1_1_w2_1", disc::CostSpec::c1(1, 1)},
        {"c1_w1_1_w2_3", disc::CostSpec::c1(1, 3)},
        {"c2_eta_50_50", disc::CostSpec::c2(0.5, 0.5)},
        {"c2_eta_30_70", disc::CostSpec::c2(0.3, 0.7)},
    };
    for (const auto& cc : cases) {
        const auto opt = disc::optimize_threshold(scores, truth, cc.spec);
        json::Value r = rates_json(opt.at_optimum, opt.intervals.front().lo,
                                   opt.intervals.front().hi);
        r["cost"] = json::num(opt.cost);
        json::Value ivs = json::Value::array();
        for (const auto& iv : opt.intervals) {
            json::Value ivj = json::Value::object();
            ivj["lo"] = json::num(iv.lo);
            ivj["hi"] = json::num(iv.hi);
            ivs.push_back(std::move(ivj));
        }
        r["optimal_intervals"] = std::move(ivs);
        rates[cc.name] = std::move(r);
    }
    o["rates"] = std::move(rates);
    return o;
}

disc::Dataset hippocampus_dataset(const MorphTable& table, Measure m) {
    disc::Dataset d;
    d.names = {"side", "time", "m"};
    d.columns = la::Mat(table.size() * 4, 3);
    std::size_t row = 0;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const auto& rec = table.subjects[k];
        for (const auto& [s, t] : kCells) {
            d.columns(row, 0) = s == Side::right ? 1.0 : 0.0;
            d.columns(row, 1) = t == Timepoint::followup ? 1.0 : 0.0;
            d.columns(row, 2) = cell_value(rec, m, s, t);
            d.y.push_back(rec.group == Group::cdr05 ? 1 : 0);
            d.subject.push_back(int(k));
            ++row;
        }
    }
    return d;
}

disc::Dataset filter_rows(const disc::Dataset& src, const std::vector<std::size_t>& rows) {
    disc::Dataset d;
    d.names = src.names;
    d.columns = la::Mat(rows.size(), src.names.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < src.names.size(); ++j)
            d.columns(i, j) = src.columns(rows[i], j);
        d.y.push_back(src.y[rows[i]]);
        d.subject.push_back(src.subject[rows[i]]);
    }
    return d;
}

json::Value logistic_analysis(const MorphTable& table, Measure m, int power_ceiling) {
    json::Value out = json::Value::object();
    const disc::Dataset all = hippocampus_dataset(table, m);
    const double prior =
        double(table.count(Group::cdr05)) / double(table.size()); // e.g. 18/44

    // M_I: side, time, measure and their pairwise interactions.
    std::vector<disc::Term> mi_terms = {
        disc::Term::main(all, "side"),          disc::Term::main(all, "time"),
        disc::Term::main(all, "m"),             disc::Term::interaction(all, "side", "time"),
        disc::Term::interaction(all, "side", "m"), disc::Term::interaction(all, "time", "m"),
    };
    const auto mi_fit = disc::fit_logistic(all, mi_terms);
    out["M_I"] = model_report(all, mi_terms, mi_fit, true, prior);

    // M_II: stepwise over mains, powers and pairwise interactions.
    std::vector<disc::Term> candidates = {
        disc::Term::main(all, "side"),
        disc::Term::main(all, "time"),
        disc::Term::interaction(all, "side", "time"),
        disc::Term::interaction(all, "side", "m"),
        disc::Term::interaction(all, "time", "m"),
    };
    for (int p = 1; p <= power_ceiling; ++p)
        candidates.push_back(disc::Term::power(all, "m", p));
    const auto mii = disc::stepwise_select(all, candidates);
    json::Value mii_report = model_report(all, mii.terms, mii.fit, true, prior);
    mii_report["intercept_only"] = json::boolean(mii.intercept_only);
    // matrices A (per hippocampus) and B (subject aggregated) at p_o = 1/2
    mii_report["matrix_A"] =
        confusion_json(disc::confusion(disc::classify(mii.fit.fitted, 0.5), all.y));
    {
        std::vector<double> scores;
        std::vector<int> truth;
        subject_scores(all, mii.fit.fitted, scores, truth);
        mii_report["matrix_B"] =
            confusion_json(disc::confusion(disc::classify(scores, 0.5), truth));
    }
    {
        disc::ClassifierConfig cfg;
        cfg.p_o = 0.5;
        cfg.aggregation = disc::Aggregation::any_positive_subject;
        const auto cv = disc::loocv(all, mii.terms, cfg);
        json::Value cvj = confusion_json(cv.summary);
        cvj["separation_folds"] = json::integer(cv.separation_folds);
        mii_report["loocv"] = std::move(cvj);
    }
    out["M_II"] = std::move(mii_report);

    // M_III: follow-up rows only.
    std::vector<std::size_t> frows;
    for (std::size_t i = 0; i < all.n(); ++i)
        if (all.columns(i, 1) == 1.0) frows.push_back(i);
    const disc::Dataset follow = filter_rows(all, frows);
    std::vector<disc::Term> f_candidates = {disc::Term::main(follow, "side"),
                                            disc::Term::interaction(follow, "side", "m")};
    for (int p = 1; p <= power_ceiling; ++p)
        f_candidates.push_back(disc::Term::power(follow, "m", p));
    const auto miii = disc::stepwise_select(follow, f_candidates);
    json::Value miii_report = model_report(follow, miii.terms, miii.fit, true, prior);
    miii_report["matrix_C"] = [&] {
        std::vector<double> scores;
        std::vector<int> truth;
        subject_scores(follow, miii.fit.fitted, scores, truth);
        return confusion_json(disc::confusion(disc::classify(scores, 0.5), truth));
    }();
    out["M_III"] = std::move(miii_report);

    // M_IV: the single cell whose lone-predictor model has the smallest
    // slope p-value.
    json::Value cells = json::Value::object();
    std::string best_cell;
    double best_p = 2.0;
    json::Value best_report;
    disc::ConfusionSummary best_matrix;
    for (const auto& [s, t] : kCells) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < all.n(); ++i)
            if (all.columns(i, 0) == (s == Side::right ? 1.0 : 0.0) &&
                all.columns(i, 1) == (t == Timepoint::followup ? 1.0 : 0.0))
                rows.push_back(i);
        const disc::Dataset one = filter_rows(all, rows);
        const std::vector<disc::Term> terms = {disc::Term::main(one, "m")};
        const auto fit = disc::fit_logistic(one, terms);
        json::Value rep = model_report(one, terms, fit, false, prior);
        const std::string label = cell_label(s, t);
        const double slope_p = fit.wald_p[1];
        rep["slope_p"] = json::num(slope_p);
        if (slope_p < best_p) {
            best_p = slope_p;
            best_cell = label;
            best_report = rep;
            best_matrix = disc::confusion(disc::classify(fit.fitted, 0.5), one.y);
        }
        cells[label] = std::move(rep);
    }
    best_report["cell"] = json::str(best_cell);
    best_report["matrix_D"] = confusion_json(best_matrix);
    out["M_IV"] = std::move(best_report);
    out["M_IV_cells"] = std::move(cells);
    return out;
}

// --------------------------------------------------------------------------- apc

json::Value apc_analysis(const MorphTable& table, int power_ceiling) {
    json::Value out = json::Value::object();
    const auto records = longi::apc_records(table);

    json::Value rows = json::Value::array();
    for (const auto& r : records) {
        json::Value o = json::Value::object();
        o["subject_id"] = json::str(r.subject_id);
        o["group"] = json::str(longi::to_string(r.group));
        o["v_apc_left"] = json::num(r.v_apc[0]);
        o["v_apc_right"] = json::num(r.v_apc[1]);
        o["d_apc_left"] = json::num(r.d_apc[0]);
        o["d_apc_right"] = json::num(r.d_apc[1]);
        rows.push_back(std::move(o));
    }
    out["records"] = std::move(rows);

    auto apc_of = [&](bool volume, Group g, int side) {
        std::vector<double> v;
        for (const auto& r : records)
            if (r.group == g)
                v.push_back(volume ? r.v_apc[std::size_t(side)] : r.d_apc[std::size_t(side)]);
        return v;
    };

    for (bool volume : {true, false}) {
        json::Value sec = json::Value::object();
        // summary per group, pooled over sides
        for (Group g : {Group::cdr0, Group::cdr05}) {
            auto both = apc_of(volume, g, 0);
            const auto right = apc_of(volume, g, 1);
            both.insert(both.end(), right.begin(), right.end());
            sec[std::string("summary_") + longi::to_string(g)] = describe(both);
        }
        // repeated-measures model over the two sides
        mixed::RepeatedData data;
        data.m = 2;
        data.n_subjects = records.size();
        data.pos = {{{0, -1}, {1, -1}}};
        data.y.resize(records.size() * 2);
        data.group.resize(records.size());
        for (std::size_t k = 0; k < records.size(); ++k) {
            data.group[k] = records[k].group == Group::cdr05 ? 1 : 0;
            data.y[k * 2 + 0] = volume ? records[k].v_apc[0] : records[k].d_apc[0];
            data.y[k * 2 + 1] = volume ? records[k].v_apc[1] : records[k].d_apc[1];
        }
        mixed::ModelSpec spec;
        spec.terms = {mixed::kD, mixed::kS, mixed::kD | mixed::kS};
        sec["group_side_cs"] = fit_json(mixed::fit(data, spec, mixed::CovKind::cs));

        // group comparison pooled over sides
        auto x = apc_of(volume, Group::cdr05, 0);
        {
            const auto xr = apc_of(volume, Group::cdr05, 1);
            x.insert(x.end(), xr.begin(), xr.end());
        }
        auto y = apc_of(volume, Group::cdr0, 0);
        {
            const auto yr = apc_of(volume, Group::cdr0, 1);
            y.insert(y.end(), yr.begin(), yr.end());
        }
        json::Value cmp = json::Value::object();
        cmp["t_test"] = test_json(stats::t_test(x, y, stats::TTestMode::pooled));
        cmp["wilcoxon"] = test_json(stats::wilcoxon_rank_sum(x, y));
        sec["group_comparison"] = std::move(cmp);

        out[volume ? "volume" : "distance"] = std::move(sec);
    }

    // logistic discrimination on the APC values (two rows per subject)
    disc::Dataset d;
    d.names = {"side", "vapc", "dapc"};
    d.columns = la::Mat(records.size() * 2, 3);
    for (std::size_t k = 0; k < records.size(); ++k)
        for (int s = 0; s < 2; ++s) {
            const std::size_t row = k * 2 + std::size_t(s);
            d.columns(row, 0) = double(s);
            d.columns(row, 1) = records[k].v_apc[std::size_t(s)];
            d.columns(row, 2) = records[k].d_apc[std::size_t(s)];
            d.y.push_back(records[k].group == Group::cdr05 ? 1 : 0);
            d.subject.push_back(int(k));
        }
    const double prior = double(table.count(Group::cdr05)) / double(table.size());

    auto suite = [&](const std::string& var) {
        std::vector<disc::Term> cands = {disc::Term::main(d, "side"),
                                         disc::Term::interaction(d, "side", var)};
        for (int p = 1; p <= power_ceiling; ++p)
            cands.push_back(disc::Term::power(d, var, p));
        const auto sel = disc::stepwise_select(d, cands);
        json::Value rep = model_report(d, sel.terms, sel.fit, true, prior);
        rep["intercept_only"] = json::boolean(sel.intercept_only);
        return rep;
    };
    out["logistic_v_apc"] = suite("vapc");
    out["logistic_d_apc"] = suite("dapc");
    return out;
}

} // namespace

json::Value run_stats(const MorphTable& table, const StatsConfig& cfg, PlotSeries* plots) {
    if (table.subjects.empty()) throw EmptyTable("empty subject table");

    json::Value report = json::Value::object();
    report["report_version"] = json::integer(1);

    json::Value config = json::Value::object();
    config["analysis"] = json::str(to_string(cfg.analysis));
    config["measure"] = json::str(to_string(cfg.measure));
    config["seed"] = json::integer(std::int64_t(cfg.seed));
    config["bootstrap_reps"] = json::integer(cfg.bootstrap_reps);
    config["mc_reps"] = json::integer(cfg.mc_reps);
    config["power_ceiling"] = json::integer(cfg.power_ceiling);
    config["subjects"] = json::integer(std::int64_t(table.size()));
    config["cdr0"] = json::integer(std::int64_t(table.count(Group::cdr0)));
    config["cdr05"] = json::integer(std::int64_t(table.count(Group::cdr05)));
    report["config"] = std::move(config);

    std::vector<Measure> measures;
    if (cfg.measure == MeasureSel::distance || cfg.measure == MeasureSel::both)
        measures.push_back(Measure::distance);
    if (cfg.measure == MeasureSel::volume || cfg.measure == MeasureSel::both)
        measures.push_back(Measure::volume);

    const bool all = cfg.analysis == AnalysisKind::full;
    json::Value analyses = json::Value::object();
    std::uint64_t stream = 0;

    auto for_measures = [&](const char* key, auto&& fn) {
        json::Value section = json::Value::object();
        for (Measure m : measures)
            section[m == Measure::distance ? "distance" : "volume"] = fn(m);
        analyses[key] = std::move(section);
    };

    if (all || cfg.analysis == AnalysisKind::summary) {
        analyses["subjects"] = subjects_summary(table);
        for_measures("summary", [&](Measure m) { return summary_analysis(table, m); });
    }
    if (all || cfg.analysis == AnalysisKind::repeated)
        for_measures("repeated",
                     [&](Measure m) { return repeated_analysis(table, m, plots); });
    if (all || cfg.analysis == AnalysisKind::posthoc)
        for_measures("posthoc", [&](Measure m) {
            return posthoc_analysis(table, m, cfg.seed, cfg.mc_reps, stream);
        });
    if (all || cfg.analysis == AnalysisKind::correlations)
        for_measures("correlations",
                     [&](Measure m) { return correlations_analysis(table, m); });
    if (all || cfg.analysis == AnalysisKind::cdf)
        for_measures("cdf", [&](Measure m) {
            return cdf_analysis(table, m, cfg.seed, cfg.bootstrap_reps, stream, plots);
        });
    if (all || cfg.analysis == AnalysisKind::pca) analyses["pca"] = pca_analysis(table);
    if (all || cfg.analysis == AnalysisKind::logistic)
        for_measures("logistic", [&](Measure m) {
            return logistic_analysis(table, m, cfg.power_ceiling);
        });
    if (all || cfg.analysis == AnalysisKind::apc)
        analyses["apc"] = apc_analysis(table, cfg.power_ceiling);

    report["analyses"] = std::move(analyses);
    return report;
}

} // namespace morph::pipeline
