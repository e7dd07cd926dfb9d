#include "morph/discrimination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "morph/distributions.hpp"
#include "morph/errors.hpp"

namespace morph::disc {

std::size_t Dataset::column_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw DesignError("unknown variable: " + name);
}

void Dataset::validate() const {
    if (y.empty()) throw DesignError("empty dataset");
    if (columns.rows != y.size() || subject.size() != y.size())
        throw DesignError("dataset shape mismatch");
    if (columns.cols != names.size()) throw DesignError("dataset column names mismatch");
}

Term Term::main(const Dataset& d, const std::string& name) {
    return {name, {{d.column_of(name), 1}}};
}

Term Term::power(const Dataset& d, const std::string& name, int p) {
    if (p == 1) return main(d, name);
    return {name + "^" + std::to_string(p), {{d.column_of(name), p}}};
}

Term Term::interaction(const Dataset& d, const std::string& a, const std::string& b) {
    return {a + ":" + b, {{d.column_of(a), 1}, {d.column_of(b), 1}}};
}

std::vector<double> term_column(const Dataset& d, const Term& t) {
    std::vector<double> col(d.n(), 1.0);
    for (const auto& [c, p] : t.factors)
        for (std::size_t i = 0; i < col.size(); ++i)
            col[i] *= std::pow(d.columns(i, c), double(p));
    return col;
}

namespace {

struct Design {
    la::Mat X;                       // n x (1 + terms), raw values
    std::vector<std::string> labels; // intercept first
};

Design build_design(const Dataset& data, const std::vector<Term>& terms) {
    Design d;
    const std::size_t n = data.n();
    d.X = la::Mat(n, 1 + terms.size());
    d.labels.push_back("(intercept)");
    for (std::size_t i = 0; i < n; ++i) d.X(i, 0) = 1.0;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto col = term_column(data, terms[t]);
        for (std::size_t i = 0; i < n; ++i) d.X(i, t + 1) = col[i];
        d.labels.push_back(terms[t].label);
    }
    return d;
}

double logistic(double eta) {
    if (eta > 300.0) eta = 300.0;
    if (eta < -300.0) eta = -300.0;
    return 1.0 / (1.0 + std::exp(-eta));
}

constexpr double kCoefCap = 30.0;

LogisticFit fit_rows(const Design& design, const std::vector<int>& y,
                     const std::vector<std::size_t>& rows) {
    const std::size_t n = rows.size();
    const std::size_t k = design.X.cols;
    if (n < k) throw DesignError("more coefficients than observations");

    bool any0 = false, any1 = false;
    for (std::size_t r : rows) (y[r] ? any1 : any0) = true;
    if (!any0 || !any1) throw DegenerateLabels("labels are all one class");

    // standardize non-intercept columns; constant columns are not allowed
    std::vector<double> center(k, 0.0), scale(k, 1.0);
    for (std::size_t j = 1; j < k; ++j) {
        double m = 0.0;
        for (std::size_t r : rows) m += design.X(r, j);
        m /= double(n);
        double v = 0.0;
        for (std::size_t r : rows) {
            const double d = design.X(r, j) - m;
            v += d * d;
        }
        v /= double(n);
        if (!(v > 0.0)) throw DesignError("constant predictor column: " + design.labels[j]);
        center[j] = m;
        scale[j] = std::sqrt(v);
    }
    auto xstd = [&](std::size_t r, std::size_t j) {
        return j == 0 ? 1.0 : (design.X(r, j) - center[j]) / scale[j];
    };

    std::vector<double> beta(k, 0.0); // standardized scale
    std::vector<double> mu(n, 0.0);
    auto raw_of = [&](const std::vector<double>& b) {
        std::vector<double> raw(k);
        raw[0] = b[0];
        for (std::size_t j = 1; j < k; ++j) {
            raw[j] = b[j] / scale[j];
            raw[0] -= b[j] * center[j] / scale[j];
        }
        return raw;
    };

    LogisticFit fit;
    fit.labels = design.labels;
    int it = 0;
    for (; it < 100; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double eta = 0.0;
            for (std::size_t j = 0; j < k; ++j) eta += xstd(rows[i], j) * beta[j];
            mu[i] = logistic(eta);
        }
        std::vector<double> g(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = double(y[rows[i]]) - mu[i];
            for (std::size_t j = 0; j < k; ++j) g[j] += xstd(rows[i], j) * r;
        }
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::fabs(v));
        if (gmax < 1e-12 && it > 0) break;

        la::Mat H(k, k);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
            for (std::size_t a = 0; a < k; ++a) {
                const double xa = xstd(rows[i], a) * w;
                for (std::size_t b = a; b < k; ++b) H(a, b) += xa * xstd(rows[i], b);
            }
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < a; ++b) H(a, b) = H(b, a);

        la::Mat Hc = H;
        if (!la::cholesky(Hc)) {
            for (std::size_t a = 0; a < k; ++a) H(a, a) += 1e-10;
            Hc = H;
            if (!la::cholesky(Hc)) throw NumericalError("singular logistic Hessian");
        }
        const auto delta = la::chol_solve(Hc, g);
        for (std::size_t j = 0; j < k; ++j) beta[j] += delta[j];

        const auto raw = raw_of(beta);
        double rmax = 0.0;
        for (double v : raw) rmax = std::max(rmax, std::fabs(v));
        if (rmax > kCoefCap) {
            // separation: cap the raw coefficient norm and stop
            const double f = kCoefCap / rmax;
            for (std::size_t j = 0; j < k; ++j) beta[j] *= f;
            fit.separation = true;
            ++it;
            break;
        }
    }
    fit.iterations = it;

    for (std::size_t i = 0; i < n; ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < k; ++j) eta += xstd(rows[i], j) * beta[j];
        mu[i] = logistic(eta);
    }
    fit.fitted.assign(n, 0.0);
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fit.fitted[i] = mu[i];
        const double p = std::min(std::max(mu[i], 1e-15), 1.0 - 1e-15);
        dev += y[rows[i]] ? std::log(p) : std::log(1.0 - p);
    }
    fit.deviance = -2.0 * dev;
    fit.aic = fit.deviance + 2.0 * double(k);
    // a perfect fit is only reachable under (quasi-)separation
    if (fit.deviance < 1e-6) fit.separation = true;

    // covariance of the raw coefficients: A cov_std A^T for the affine
    // de-standardization map
    la::Mat H(k, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
        for (std::size_t a = 0; a < k; ++a) {
            const double xa = xstd(rows[i], a) * w;
            for (std::size_t b = a; b < k; ++b) H(a, b) += xa * xstd(rows[i], b);
        }
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < a; ++b) H(a, b) = H(b, a);
    la::Mat cov_std = la::inverse_spd(H);
    la::Mat A(k, k);
    A(0, 0) = 1.0;
    for (std::size_t j = 1; j < k; ++j) {
        A(j, j) = 1.0 / scale[j];
        A(0, j) = -center[j] / scale[j];
    }
    la::Mat cov_raw = la::mul(la::mul(A, cov_std), A.transposed());

    fit.beta = raw_of(beta);
    fit.se.resize(k);
    fit.wald_z.resize(k);
    fit.wald_p.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        fit.se[j] = std::sqrt(std::max(cov_raw(j, j), 0.0));
        fit.wald_z[j] = fit.se[j] > 0.0 ? fit.beta[j] / fit.se[j] : 0.0;
        fit.wald_p[j] = 2.0 * dist::normal_sf(std::fabs(fit.wald_z[j]));
    }
    return fit;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

} // namespace

LogisticFit fit_logistic(const Dataset& data, const std::vector<Term>& terms) {
    data.validate();
    const Design design = build_design(data, terms);
    return fit_rows(design, data.y, all_rows(data.n()));
}

StepwiseResult stepwise_select(const Dataset& data, const std::vector<Term>& candidates,
                               double alpha) {
    data.validate();
    std::vector<std::size_t> included;

    auto fit_subset = [&](const std::vector<std::size_t>& idx) {
        std::vector<Term> terms;
        for (std::size_t i : idx) terms.push_back(candidates[i]);
        return fit_logistic(data, terms);
    };

    LogisticFit current = fit_subset(included);
    // Phase 1: bidirectional AIC descent.
    for (int round = 0; round < 200; ++round) {
        double best_aic = current.aic - 1e-10;
        int best_kind = 0; // +1 add, -1 drop
        std::size_t best_idx = 0;
        std::string best_label;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const bool in =
                std::find(included.begin(), included.end(), c) != included.end();
            std::vector<std::size_t> trial = included;
            if (in) {
                trial.erase(std::find(trial.begin(), trial.end(), c));
            } else {
                trial.push_back(c);
            }
            double aic;
            try {
                aic = fit_subset(trial).aic;
            } catch (const Error&) {
                continue; // degenerate candidate (constant column, etc.)
            }
            const std::string& label = candidates[c].label;
            if (aic < best_aic - 1e-10 ||
                (std::fabs(aic - best_aic) <= 1e-10 && best_kind != 0 &&
                 label < best_label)) {
                best_aic = aic;
                best_kind = in ? -1 : +1;
                best_idx = c;
                best_label = label;
            }
        }
        if (best_kind == 0) break;
        if (best_kind > 0) {
            included.push_back(best_idx);
        } else {
            included.erase(std::find(included.begin(), included.end(), best_idx));
        }
        current = fit_subset(included);
    }

    // Phase 2: backward elimination on Wald p.
    while (!included.empty()) {
        current = fit_subset(included);
        double worst_p = -1.0;
        std::size_t worst_pos = 0;
        for (std::size_t t = 0; t < included.size(); ++t) {
            const double p = current.wald_p[t + 1];
            const std::string& label = candidates[included[t]].label;
            if (p > worst_p + 1e-12 ||
                (std::fabs(p - worst_p) <= 1e-12 &&
                 label < candidates[included[worst_pos]].label)) {
                worst_p = p;
                worst_pos = t;
            }
        }
        if (worst_p <= alpha) break;
        included.erase(included.begin() + long(worst_pos));
    }
    current = fit_subset(included);

    StepwiseResult res;
    for (std::size_t i : included) res.terms.push_back(candidates[i]);
    res.fit = std::move(current);
    res.intercept_only = included.empty();
    return res;
}

std::vector<int> classify(const std::vector<double>& probabilities, double p_o) {
    std::vector<int> labels(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i)
        labels[i] = probabilities[i] > p_o ? 1 : 0;
    return labels;
}

int aggregate_subject(const std::vector<int>& labels) {
    if (labels.empty()) throw MissingData("subject has no hippocampus labels");
    for (int l : labels)
        if (l) return 1;
    return 0;
}

ConfusionSummary confusion(const std::vector<int>& labels, const std::vector<int>& truth) {
    if (labels.size() != truth.size())
        throw LengthMismatch("labels and truth differ in length");
    long t0 = 0, f0 = 0, t1 = 0, f1 = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (truth[i] == 0) {
            (labels[i] == 0 ? t0 : f1) += 1;
        } else {
            (labels[i] == 1 ? t1 : f0) += 1;
        }
    }
    return confusion_from_counts(t0, f0, f1, t1);
}

ConfusionSummary confusion_from_counts(long t_cdr0, long f_cdr0, long f_cdr05, long t_cdr05) {
    ConfusionSummary c;
    c.t_cdr0 = t_cdr0;
    c.f_cdr0 = f_cdr0;
    c.f_cdr05 = f_cdr05;
    c.t_cdr05 = t_cdr05;
    const double n = double(c.n());
    const double n0 = double(c.n_cdr0());
    const double n1 = double(c.n_cdr05());
    c.ccr = n > 0.0 ? double(t_cdr0 + t_cdr05) / n * 100.0 : 0.0;
    c.sensitivity = n1 > 0.0 ? double(t_cdr05) / n1 * 100.0 : 0.0;
    c.specificity = n0 > 0.0 ? double(t_cdr0) / n0 * 100.0 : 0.0;
    return c;
}

int percent_round(double percent) { return int(std::lround(percent)); }

CostSpec CostSpec::c1(int w1, int w2) {
    if (w1 <= 0 || w2 <= 0 || w1 % 2 == 0 || w2 % 2 == 0 || w1 > w2)
        throw InvalidParameter("C1 weights must be positive odd integers with w1 <= w2");
    CostSpec c;
    c.kind = Kind::c1;
    c.a = double(w1);
    c.b = double(w2);
    return c;
}

CostSpec CostSpec::c2(double eta1, double eta2) {
    if (eta1 < 0.0 || eta2 < 0.0 || std::fabs(eta1 + eta2 - 1.0) > 1e-12)
        throw InvalidParameter("C2 weights must be nonnegative and sum to 1");
    CostSpec c;
    c.kind = Kind::c2;
    c.a = eta1;
    c.b = eta2;
    return c;
}

double CostSpec::operator()(const ConfusionSummary& c) const {
    switch (kind) {
        case Kind::c1:
            return -std::pow(double(c.t_cdr0 - c.f_cdr0), a) *
                   std::pow(double(c.t_cdr05 - c.f_cdr05), b);
        case Kind::c2: {
            const double n0 = double(c.n_cdr0());
            const double n1 = double(c.n_cdr05());
            return -(a * double(c.t_cdr0 - c.f_cdr0) / n0 +
                     b * double(c.t_cdr05 - c.f_cdr05) / n1);
        }
        case Kind::none: break;
    }
    throw InvalidParameter("cost function not configured");
}

bool ThresholdOptimum::contains(double p) const {
    for (const auto& iv : intervals)
        if (iv.contains(p)) return true;
    return false;
}

ThresholdOptimum optimize_threshold(const std::vector<double>& scores,
                                    const std::vector<int>& truth, const CostSpec& cost) {
    if (scores.size() != truth.size())
        throw LengthMismatch("scores and truth differ in length");
    if (cost.kind == CostSpec::Kind::none)
        throw InvalidParameter("optimize_threshold needs a cost function");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw InvalidParameter("scores must lie in [0,1]");

    // regime boundaries: 0, the distinct scores, 1; classification is
    // constant on [b_i, b_{i+1}) and p = 1 forms its own regime
    std::set<double> bset{0.0, 1.0};
    for (double s : scores) bset.insert(s);
    std::vector<double> bounds(bset.begin(), bset.end());

    struct Regime {
        double rep, lo, hi;
        bool closed_hi;
        double cost;
        ConfusionSummary summary;
    };
    std::vector<Regime> regimes;
    auto eval_at = [&](double p) { return confusion(classify(scores, p), truth); };
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        Regime r{bounds[i], bounds[i], bounds[i + 1], false, 0.0, {}};
        r.summary = eval_at(r.rep);
        r.cost = cost(r.summary);
        regimes.push_back(std::move(r));
    }
    {
        Regime r{1.0, 1.0, 1.0, true, 0.0, {}};
        r.summary = eval_at(1.0);
        r.cost = cost(r.summary);
        regimes.push_back(std::move(r));
    }

    double best = regimes.front().cost;
    for (const auto& r : regimes) best = std::min(best, r.cost);

    ThresholdOptimum out;
    out.cost = best;
    bool first = true;
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        if (!(regimes[i].cost <= best + 0.0)) continue;
        if (regimes[i].cost != best) continue;
        if (first) {
            out.at_optimum = regimes[i].summary;
            first = false;
        }
        if (!out.intervals.empty() && out.intervals.back().hi == regimes[i].lo &&
            !out.intervals.back().closed_hi) {
            out.intervals.back().hi = regimes[i].hi;
            out.intervals.back().closed_hi = regimes[i].closed_hi;
        } else {
            out.intervals.push_back({regimes[i].lo, regimes[i].hi, regimes[i].closed_hi});
        }
    }
    return out;
}

std::vector<double> predict(const LogisticFit& fit, const Dataset& data,
                            const std::vector<Term>& terms,
                            const std::vector<std::size_t>& rows) {
    const Design design = build_design(data, terms);
    if (design.X.cols != fit.beta.size()) throw DesignError("model/term mismatch in predict");
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        double eta = 0.0;
        for (std::size_t j = 0; j < design.X.cols; ++j) eta += design.X(r, j) * fit.beta[j];
        out.push_back(logistic(eta));
    }
    return out;
}

LoocvResult loocv(const Dataset& data, const std::vector<Term>& terms,
                  const ClassifierConfig& config) {
    data.validate();
    std::vector<int> subjects(data.subject);
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (subjects.size() < 3) throw InvalidParameter("loocv requires at least 3 subjects");

    LoocvResult res;
    res.held_out_probability.assign(data.n(), 0.0);
    const Design design = build_design(data, terms);

    for (int held : subjects) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < data.n(); ++i)
            (data.subject[i] == held ? test : train).push_back(i);
        LogisticFit fold = fit_rows(design, data.y, train);
        if (fold.separation) ++res.separation_folds;
        const auto probs = predict(fold, data, terms, test);
        for (std::size_t i = 0; i < test.size(); ++i)
            res.held_out_probability[test[i]] = probs[i];
    }

    const auto row_labels = classify(res.held_out_probability, config.p_o);
    if (config.aggregation == Aggregation::per_hippocampus) {
        res.summary = confusion(row_labels, data.y);
    } else {
        std::vector<int> subj_label, subj_truth;
        for (int s : subjects) {
            std::vector<int> labels;
            int truth = 0;
            for (std::size_t i = 0; i < data.n(); ++i)
                if (data.subject[i] == s) {
                    labels.push_back(row_labels[i]);
                    truth = data.y[i];
                }
            subj_label.push_back(aggregate_subject(labels));
            subj_truth.push_back(truth);
        }
        res.summary = confusion(subj_label, subj_truth);
    }
    return res;
}

} // namespace morph::disc
