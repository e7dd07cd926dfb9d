// morphkit: batch front door for the morphometry toolkit.
//
//   register  LDDMM registration of MVOL1 volume pairs (single or manifest)
//   distance  registration reporting the metric distance only
//   stats     statistical pipeline over a subject table CSV
//   validate  subject table schema check

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "morph/errors.hpp"
#include "morph/jsonio.hpp"
#include "morph/lddmm.hpp"
#include "morph/longitudinal.hpp"
#include "morph/pipeline.hpp"
#include "morph/volume.hpp"

namespace {

using morph::json::Value;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw morph::FormatError(path + ": cannot open for writing");
    os << text;
    if (!os.flush()) throw morph::FormatError(path + ": write failed");
}

Value params_json(const morph::lddmm::LddmmParams& p) {
    Value o = Value::object();
    o["alpha"] = morph::json::num(p.alpha);
    o["gamma"] = morph::json::num(p.gamma);
    o["exponent"] = morph::json::num(p.exponent);
    o["sigma"] = morph::json::num(p.sigma);
    o["timesteps"] = morph::json::integer(p.timesteps);
    o["step_size"] = morph::json::num(p.step_size);
    o["max_iters"] = morph::json::integer(p.max_iters);
    o["energy_tol"] = morph::json::num(p.energy_tol);
    return o;
}

struct RegisterJob {
    std::string template_path, target_path, out_path, warped_path;
};

void run_one_registration(const RegisterJob& job, const morph::lddmm::LddmmParams& params,
                          bool distance_only) {
    const morph::Volume3D tpl = morph::read_mvol(job.template_path);
    const morph::Volume3D tgt = morph::read_mvol(job.target_path);
    const auto res = morph::lddmm::register_volumes(tpl, tgt, params);

    Value o = Value::object();
    o["report_version"] = morph::json::integer(1);
    o["template"] = morph::json::str(job.template_path);
    o["target"] = morph::json::str(job.target_path);
    o["params"] = params_json(params);
    o["metric_distance"] = morph::json::num(res.metric_distance);
    o["converged"] = morph::json::boolean(res.converged);
    o["iterations"] = morph::json::integer(res.iterations);
    if (!distance_only) {
        Value trace = Value::array();
        for (const auto& e : res.energy_trace) {
            Value row = Value::object();
            row["iteration"] = morph::json::integer(e.iteration);
            row["matching"] = morph::json::num(e.matching);
            row["regularization"] = morph::json::num(e.regularization);
            row["total"] = morph::json::num(e.total());
            trace.push_back(std::move(row));
        }
        o["energy_trace"] = std::move(trace);
        if (!job.warped_path.empty()) {
            morph::write_mvol(res.warped, job.warped_path);
            o["warped"] = morph::json::str(job.warped_path);
        }
    }
    write_text(job.out_path, o.dump(2) + "\n");
}

std::vector<RegisterJob> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw morph::FormatError(path + ": cannot open");
    std::vector<RegisterJob> jobs;
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        RegisterJob job;
        std::string warped;
        if (!std::getline(ss, job.template_path, ',') ||
            !std::getline(ss, job.target_path, ',') || !std::getline(ss, job.out_path, ',')) {
            throw morph::FormatError(path + ": line " + std::to_string(lineno) +
                                     ": expected template,target,out[,warped]");
        }
        if (std::getline(ss, warped, ',')) job.warped_path = warped;
        jobs.push_back(std::move(job));
    }
    if (jobs.empty()) throw morph::FormatError(path + ": empty manifest");
    return jobs;
}

int run_registrations(const std::vector<RegisterJob>& jobs,
                      const morph::lddmm::LddmmParams& params, int threads,
                      bool distance_only) {
    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                run_one_registration(jobs[i], params, distance_only);
            } catch (const std::exception& e) {
                std::cerr << "error: " << jobs[i].template_path << " vs "
                          << jobs[i].target_path << ": " << e.what() << "\n";
                failures.fetch_add(1);
            }
        }
    };
    if (threads <= 1 || jobs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int nt = std::min<int>(threads, int(jobs.size()));
        for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return failures.load() == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphkit: LDDMM metric distances and longitudinal morphometry statistics"};
    app.require_subcommand(1);

    morph::lddmm::LddmmParams params;
    RegisterJob single;
    std::string manifest;
    int jobs_limit = 1;

    auto add_param_flags = [&](CLI::App* cmd) {
        cmd->add_option("--alpha", params.alpha, "Laplacian coefficient");
        cmd->add_option("--gamma", params.gamma, "operator constant");
        cmd->add_option("--exponent", params.exponent, "operator power (>1.5)");
        cmd->add_option("--sigma", params.sigma, "matching weight");
        cmd->add_option("--timesteps", params.timesteps, "flow timesteps (>=2)");
        cmd->add_option("--max-iters", params.max_iters, "gradient descent iterations");
        cmd->add_option("--step", params.step_size, "initial gradient step");
        cmd->add_option("--tol", params.energy_tol, "relative energy stopping tolerance");
    };

    CLI::App* reg = app.add_subcommand("register", "register a template/target MVOL1 pair");
    reg->add_option("--template", single.template_path, "template volume (MVOL1)");
    reg->add_option("--target", single.target_path, "target volume (MVOL1)");
    reg->add_option("--out", single.out_path, "result JSON path");
    reg->add_option("--warped", single.warped_path, "write warped template MVOL1 here");
    reg->add_option("--manifest", manifest, "batch CSV: template,target,out[,warped]");
    reg->add_option("--jobs", jobs_limit, "concurrent registrations for --manifest");
    add_param_flags(reg);

    CLI::App* dist = app.add_subcommand("distance", "register and report the metric distance");
    dist->add_option("--template", single.template_path, "template volume (MVOL1)")
        ->required();
    dist->add_option("--target", single.target_path, "target volume (MVOL1)")->required();
    dist->add_option("--out", single.out_path, "result JSON path")->required();
    add_param_flags(dist);

    std::string table_path, analysis_name = "summary", measure_name = "both", out_path;
    std::string plot_dir;
    morph::pipeline::StatsConfig stats_cfg;
    std::int64_t seed_flag = -1;

    CLI::App* stats = app.add_subcommand("stats", "run analyses over a subject table");
    stats->add_option("--table", table_path, "subject table CSV")->required();
    stats->add_option("--analysis", analysis_name,
                      "summary|repeated|posthoc|correlations|cdf|pca|logistic|apc|full");
    stats->add_option("--measure", measure_name, "distance|volume|both");
    stats->add_option("--seed", seed_flag, "seed for bootstrap/permutation/Monte Carlo");
    stats->add_option("--out", out_path, "report JSON path")->required();
    stats->add_option("--plot-dir", plot_dir, "directory for plot-data CSVs");
    stats->add_option("--bootstrap-reps", stats_cfg.bootstrap_reps,
                      "Cramer/CvM resampling replicates");
    stats->add_option("--mc-reps", stats_cfg.mc_reps, "Lilliefors Monte Carlo replicates");
    stats->add_option("--power-ceiling", stats_cfg.power_ceiling,
                      "max power for continuous logistic terms");

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "schema-check a subject table");
    validate->add_option("--table", validate_path, "subject table CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (reg->parsed()) {
            std::vector<RegisterJob> jobs;
            if (!manifest.empty()) {
                jobs = load_manifest(manifest);
            } else {
                if (single.template_path.empty() || single.target_path.empty() ||
                    single.out_path.empty())
                    throw morph::InvalidParameter(
                        "register needs --template/--target/--out or --manifest");
                jobs.push_back(single);
            }
            return run_registrations(jobs, params, jobs_limit, false);
        }
        if (dist->parsed()) {
            run_one_registration(single, params, true);
            return 0;
        }
        if (stats->parsed()) {
            stats_cfg.analysis = morph::pipeline::analysis_from_string(analysis_name);
            if (measure_name == "distance") {
                stats_cfg.measure = morph::pipeline::MeasureSel::distance;
            } else if (measure_name == "volume") {
                stats_cfg.measure = morph::pipeline::MeasureSel::volume;
            } else if (measure_name == "both") {
                stats_cfg.measure = morph::pipeline::MeasureSel::both;
            } else {
                throw morph::InvalidParameter("unknown measure: " + measure_name);
            }
            if (seed_flag >= 0) {
                stats_cfg.seed = std::uint64_t(seed_flag);
            } else if (const char* env = std::getenv("MORPHKIT_SEED")) {
                stats_cfg.seed = std::strtoull(env, nullptr, 10);
            } else if (morph::pipeline::needs_seed(stats_cfg.analysis)) {
                throw morph::InvalidParameter(
                    "analysis \"" + analysis_name +
                    "\" draws random replicates; pass --seed or set MORPHKIT_SEED");
            }
            const auto table = morph::longi::load_table_file(table_path);
            morph::pipeline::PlotSeries plots;
            const Value report = morph::pipeline::run_stats(table, stats_cfg, &plots);
            write_text(out_path, report.dump(2) + "\n");
            if (!plot_dir.empty()) {
                for (const auto& [name, content] : plots)
                    write_text(plot_dir + "/" + name, content);
            }
            return 0;
        }
        if (validate->parsed()) {
            const auto table = morph::longi::load_table_file(validate_path);
            std::cout << "ok: " << table.size() << " subjects (CDR0 "
                      << table.count(morph::longi::Group::cdr0) << ", CDR0.5 "
                      << table.count(morph::longi::Group::cdr05) << ")\n";
            return 0;
        }
    } catch (const morph::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const morph::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const morph::ValueError& e) {
        std::cerr << "value error: " << e.what() << "\n";
        return 2;
    } catch (const morph::EmptyTable& e) {
        std::cerr << "empty table: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
