#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "morph/jsonio.hpp"
#include "morph/longitudinal.hpp"

namespace morph::pipeline {

enum class AnalysisKind {
    summary,
    repeated,
    posthoc,
    correlations,
    cdf,
    pca,
    logistic,
    apc,
    full
};

enum class MeasureSel { distance, volume, both };

AnalysisKind analysis_from_string(const std::string& s);
const char* to_string(AnalysisKind a);
const char* to_string(MeasureSel m);

/// True when the analysis consumes random draws (bootstrap, permutation or
/// Monte Carlo) and therefore requires a seed.
bool needs_seed(AnalysisKind a);

struct StatsConfig {
    AnalysisKind analysis = AnalysisKind::summary;
    MeasureSel measure = MeasureSel::both;
    std::uint64_t seed = 0;
    int bootstrap_reps = 10000; // Cramer and Cramer-von Mises
    int mc_reps = 20000;        // Lilliefors Monte Carlo
    int power_ceiling = 9;      // candidate powers for logistic terms
};

/// Plot-ready CSV side outputs: (suffix, contents). The caller picks paths.
using PlotSeries = std::vector<std::pair<std::string, std::string>>;

/// Run the requested analyses over a validated subject table. The report is
/// deterministic given (table, config): reruns are byte-identical.
json::Value run_stats(const longi::MorphTable& table, const StatsConfig& cfg,
                      PlotSeries* plots);

} // namespace morph::pipeline
