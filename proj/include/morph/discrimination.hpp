#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "morph/linalg.hpp"

namespace morph::disc {

/// Observation table for logistic discrimination: named base variables in
/// columns, one binary outcome per row, and a subject id per row so
/// cross-validation can hold out whole subjects.
struct Dataset {
    std::vector<std::string> names; // base variable names
    la::Mat columns;                // n x names.size(), raw values
    std::vector<int> y;             // 0 = CDR0, 1 = CDR0.5
    std::vector<int> subject;       // subject index per row

    std::size_t n() const { return y.size(); }
    std::size_t column_of(const std::string& name) const;
    void validate() const;
};

/// A model term: product of base columns raised to small integer powers.
/// "side" is {("side",1)}, "d^3" is {("d",3)}, "side:d" is both at power 1.
struct Term {
    std::string label;
    std::vector<std::pair<std::size_t, int>> factors;

    static Term main(const Dataset& d, const std::string& name);
    static Term power(const Dataset& d, const std::string& name, int p);
    static Term interaction(const Dataset& d, const std::string& a, const std::string& b);
};

std::vector<double> term_column(const Dataset& d, const Term& t);

struct LogisticFit {
    std::vector<std::string> labels; // intercept first
    std::vector<double> beta;
    std::vector<double> se;
    std::vector<double> wald_z;
    std::vector<double> wald_p;
    double deviance = 0.0;
    double aic = 0.0;
    std::vector<double> fitted;  // probabilities per row
    bool separation = false;     // coefficients hit the norm cap
    int iterations = 0;
};

/// Newton/IRLS maximum likelihood on an internally standardized design;
/// coefficients are reported on the raw scale. Coefficient norms above 30
/// flag (quasi-)separation and the fit is capped there.
LogisticFit fit_logistic(const Dataset& data, const std::vector<Term>& terms);

struct StepwiseResult {
    std::vector<Term> terms;
    LogisticFit fit;
    bool intercept_only = false; // no candidate survived
};

/// Phase 1: bidirectional stepwise minimizing AIC from the intercept-only
/// model. Phase 2: backward elimination of the largest Wald p until all
/// remaining terms have p <= alpha. Ties break on term label.
StepwiseResult stepwise_select(const Dataset& data, const std::vector<Term>& candidates,
                               double alpha = 0.05);

/// Strict-greater threshold rule: p > p_o classifies CDR0.5, ties go to CDR0.
std::vector<int> classify(const std::vector<double>& probabilities, double p_o);

/// Subject is CDR0.5 iff any of its hippocampus labels is CDR0.5.
int aggregate_subject(const std::vector<int>& labels);

struct ConfusionSummary {
    long t_cdr0 = 0;  // controls classified CDR0
    long f_cdr0 = 0;  // CDR0.5 classified CDR0 (missed cases)
    long t_cdr05 = 0; // CDR0.5 classified CDR0.5
    long f_cdr05 = 0; // controls classified CDR0.5
    double ccr = 0.0; // percentages, exact
    double sensitivity = 0.0;
    double specificity = 0.0;

    long n() const { return t_cdr0 + f_cdr0 + t_cdr05 + f_cdr05; }
    long n_cdr0() const { return t_cdr0 + f_cdr05; }
    long n_cdr05() const { return t_cdr05 + f_cdr0; }
};

ConfusionSummary confusion(const std::vector<int>& labels, const std::vector<int>& truth);
ConfusionSummary confusion_from_counts(long t_cdr0, long f_cdr0, long f_cdr05, long t_cdr05);

/// Integer-percent display rounding (exact values stay in the summary).
int percent_round(double percent);

struct CostSpec {
    enum class Kind { none, c1, c2 } kind = Kind::none;
    double a = 1.0; // w1 or eta1
    double b = 1.0; // w2 or eta2

    static CostSpec c1(int w1, int w2);
    static CostSpec c2(double eta1, double eta2);
    double operator()(const ConfusionSummary& c) const;
};

struct ThresholdInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool closed_hi = false;

    bool contains(double p) const {
        return p >= lo && (p < hi || (closed_hi && p == hi));
    }
};

struct ThresholdOptimum {
    std::vector<ThresholdInterval> intervals; // maximal optimal p_o ranges
    double cost = 0.0;
    ConfusionSummary at_optimum; // at the lowest optimal regime
    bool contains(double p) const;
};

/// Exhaustive scan over the finite set of decision-relevant thresholds (the
/// score values, 0 and 1); returns every optimal p_o interval.
ThresholdOptimum optimize_threshold(const std::vector<double>& scores,
                                    const std::vector<int>& truth, const CostSpec& cost);

enum class Aggregation { per_hippocampus, any_positive_subject };

struct ClassifierConfig {
    double p_o = 0.5;
    Aggregation aggregation = Aggregation::per_hippocampus;
    CostSpec cost; // Kind::none means fixed p_o
};

struct LoocvResult {
    ConfusionSummary summary;
    std::vector<double> held_out_probability; // per row
    int separation_folds = 0;
};

/// Leave-one-subject-out: all rows of the held-out subject leave together,
/// the model is refit from scratch, and held-out predictions are pooled.
LoocvResult loocv(const Dataset& data, const std::vector<Term>& terms,
                  const ClassifierConfig& config);

/// Apply a fitted model to (possibly different) rows of a dataset.
std::vector<double> predict(const LogisticFit& fit, const Dataset& data,
                            const std::vector<Term>& terms,
                            const std::vector<std::size_t>& rows);

} // namespace morph::disc
