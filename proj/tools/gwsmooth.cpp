// gwsmooth: tensor-product p-spline smoothing of spatiotemporal well data
// with automatic Bayesian smoothing-parameter selection.
//
// Subcommands: fit, predict, simulate, bench. Exit codes: 0 ok, 2 data
// error, 3 configuration error, 4 numerical error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gwsmooth/artifact.hpp"
#include "gwsmooth/bench.hpp"
#include "gwsmooth/dataset.hpp"
#include "gwsmooth/predict.hpp"
#include "gwsmooth/selection.hpp"
#include "gwsmooth/simulate.hpp"

namespace {

using namespace gwsmooth;

std::array<int, 3> parse_basis(const std::string& text) {
    std::array<int, 3> counts{};
    std::istringstream is(text);
    char c1 = 0, c2 = 0;
    if (!(is >> counts[0] >> c1 >> counts[1] >> c2 >> counts[2]) || c1 != ',' || c2 != ',' ||
        !is.eof()) {
        throw ConfigError("--basis expects three comma-separated counts, e.g. 14,8,5");
    }
    return counts;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            values.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + tok + "'");
        }
    }
    if (values.empty()) throw ConfigError("empty number list");
    return values;
}

struct GridFlags {
    double lo = -8.0;
    double hi = 8.0;
    int points = 101;

    LambdaGrid build() const {
        LambdaGrid g = LambdaGrid::linspace(lo, hi, points);
        g.validate();
        return g;
    }
};

void add_grid_flags(CLI::App* cmd, GridFlags& grid) {
    cmd->add_option("--grid-lo", grid.lo, "lower log10(lambda) bound (default -8)");
    cmd->add_option("--grid-hi", grid.hi, "upper log10(lambda) bound (default 8)");
    cmd->add_option("--grid-points", grid.points, "number of grid points (default 101)");
}

struct FitFlags {
    std::string input, out, trace;
    std::string basis;
    int degree = 2;
    int penalty_order = 1;
    std::string method = "map";
    std::string transform = "log1p";
    std::string lambda_prior = "uniform";
    double prior_a = 1e-4, prior_b = 1e-4;
    int folds = 10;
    std::uint64_t seed = 0;
    bool full_trace = false;
    GridFlags grid;
};

int run_fit(const FitFlags& f) {
    const Transform transform = transform_from_name(f.transform);
    const Dataset ds = load_csv(f.input, transform);
    const TensorBasisSpec spec =
        TensorBasisSpec::for_dataset(ds, parse_basis(f.basis), f.degree, f.penalty_order);

    PriorConfig prior;
    prior.a = f.prior_a;
    prior.b = f.prior_b;
    if (f.lambda_prior == "uniform") {
        prior.lambda_prior = LambdaPrior::uniform_on_lambda;
    } else if (f.lambda_prior == "log-uniform") {
        prior.lambda_prior = LambdaPrior::uniform_on_log_lambda;
    } else {
        throw ConfigError("--lambda-prior must be uniform or log-uniform");
    }

    FitArtifact artifact;
    artifact.grid = f.grid.build();
    artifact.fit = select(ds, spec, method_from_name(f.method), prior, artifact.grid, f.seed,
                          f.folds, f.full_trace);
    artifact.spec = spec;
    artifact.hull = convex_hull_region(ds);
    artifact.data_digest = file_digest(f.input);

    save_fit_artifact(f.out, artifact);
    if (!f.trace.empty()) write_score_trace_csv(f.trace, artifact.fit.trace);

    if (artifact.fit.lambda.has_value()) {
        std::fprintf(stderr, "fit: method=%s lambda=%.6g edf=%.2f n=%d\n",
                     method_name(artifact.fit.method), *artifact.fit.lambda, artifact.fit.edf,
                     artifact.fit.n);
    } else {
        std::fprintf(stderr, "fit: method=%s (model averaged) edf=%.2f n=%d\n",
                     method_name(artifact.fit.method), artifact.fit.edf, artifact.fit.n);
    }
    if (artifact.fit.endpoint_warning) {
        std::fprintf(stderr, "warning: optimum on the lambda grid boundary; "
                             "consider widening --grid-lo/--grid-hi\n");
    }
    if (artifact.fit.fold_warning) {
        std::fprintf(stderr, "warning: some cross-validation folds were invalid\n");
    }
    return 0;
}

struct PredictFlags {
    std::string artifact, out, input, at_times;
    int s1_count = 50;
    int s2_count = 50;
    int t_count = 10;
    bool sd = false;
    bool raw = false;
};

int run_predict(const PredictFlags& f) {
    const FitArtifact artifact = load_fit_artifact(f.artifact);
    const TensorBasisSpec& spec = artifact.spec;

    if (f.s1_count < 1 || f.s2_count < 1 || f.t_count < 1) {
        throw ConfigError("grid axis counts must be >= 1");
    }
    auto axis = [](double lo, double hi, int count) {
        return count == 1 ? Eigen::VectorXd::Constant(1, 0.5 * (lo + hi)).eval()
                          : Eigen::VectorXd::LinSpaced(count, lo, hi).eval();
    };
    const Eigen::VectorXd s1 = axis(spec.dim[0].lo, spec.dim[0].hi, f.s1_count);
    const Eigen::VectorXd s2 = axis(spec.dim[1].lo, spec.dim[1].hi, f.s2_count);
    Eigen::VectorXd t;
    if (!f.at_times.empty()) {
        const std::vector<double> times = parse_double_list(f.at_times);
        t = Eigen::Map<const Eigen::VectorXd>(times.data(),
                                              static_cast<Eigen::Index>(times.size()));
        for (double tv : times) {
            if (tv < spec.dim[2].lo || tv > spec.dim[2].hi) {
                throw DataError("requested time " + std::to_string(tv) +
                                " outside fitted range [" + std::to_string(spec.dim[2].lo) +
                                ", " + std::to_string(spec.dim[2].hi) + "] (axis t)");
            }
        }
    } else {
        t = axis(spec.dim[2].lo, spec.dim[2].hi, f.t_count);
    }

    const PredictionGrid grid =
        predict_grid(artifact.fit, spec, s1, s2, t, &artifact.hull.polygon);

    Eigen::VectorXd sd;
    if (f.sd) {
        if (!artifact.fit.lambda.has_value()) {
            throw ConfigError("--sd is unsupported for model-averaged artifacts");
        }
        if (f.input.empty()) {
            throw ConfigError("--sd needs --input to rebuild the decomposition "
                              "from the original data");
        }
        const Dataset ds = load_csv(f.input, artifact.fit.transform);
        if (file_digest(f.input) != artifact.data_digest) {
            throw DataError("--input does not match the artifact's data digest");
        }
        const DecomposedModel model(tensor_design(ds, spec),
                                    reduce_penalty(difference_penalty(spec)),
                                    working_response(ds));
        // expand the grid into points once; axes are modest by construction
        const Eigen::Index total = grid.values.size();
        Eigen::VectorXd ps1(total), ps2(total), pt(total);
        Eigen::Index row = 0;
        for (int i3 = 0; i3 < t.size(); ++i3) {
            for (int i2 = 0; i2 < s2.size(); ++i2) {
                for (int i1 = 0; i1 < s1.size(); ++i1, ++row) {
                    ps1[row] = s1[i1];
                    ps2[row] = s2[i2];
                    pt[row] = t[i3];
                }
            }
        }
        sd = predictive_sd(artifact.fit, model, spec, ps1, ps2, pt);
    }

    const std::filesystem::path tmp = f.out + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << "s1,s2,t,pred";
        if (f.raw) out << ",pred_raw";
        if (f.sd) out << ",sd";
        out << ",in_hull\n";
        char buf[512];
        Eigen::Index row = 0;
        for (int i3 = 0; i3 < t.size(); ++i3) {
            for (int i2 = 0; i2 < s2.size(); ++i2) {
                for (int i1 = 0; i1 < s1.size(); ++i1, ++row) {
                    const double pred = grid.value_at(i1, i2, static_cast<int>(i3));
                    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", s1[i1], s2[i2],
                                  t[i3], pred);
                    out << buf;
                    if (f.raw) {
                        std::snprintf(buf, sizeof(buf), ",%.17g",
                                      back_transform_value(pred, artifact.fit.transform));
                        out << buf;
                    }
                    if (f.sd) {
                        std::snprintf(buf, sizeof(buf), ",%.17g", sd[row]);
                        out << buf;
                    }
                    out << (grid.in_hull[static_cast<size_t>(i1) +
                                         static_cast<size_t>(s1.size()) * i2]
                                ? ",1\n"
                                : ",0\n");
                }
            }
        }
    }
    std::filesystem::rename(tmp, f.out);
    return 0;
}

struct SimulateFlags {
    int scenario = 1;
    std::uint64_t seed = 0;
    std::string out, truth;
    double snr = 10.0;
};

int run_simulate(const SimulateFlags& f) {
    auto [flow, initial] = default_flow_and_initial(f.seed);
    const GroundTruth truth = solve_pde(flow, initial);

    ScenarioSpec spec;
    spec.id = f.scenario;
    spec.seed = f.seed;
    spec.snr = f.snr;
    const Dataset ds = build_scenario(truth, spec);
    write_csv(f.out, ds);
    if (!f.truth.empty()) truth.save(f.truth);
    std::fprintf(stderr, "simulate: scenario %d, %d observations at %d wells\n", f.scenario,
                 ds.n(), ds.well_count());
    return 0;
}

struct BenchFlags {
    std::string scenarios = "1,2,3";
    std::string methods = "aicc,gcv,cv-obs,cv-well,bic,map,bayes-avg";
    int replicates = 50;
    std::uint64_t seed = 1;
    std::string out;
    std::string basis = "14,8,5";
    int degree = 2;
    int penalty_order = 1;
    int folds = 10;
    int threads = 0;
    GridFlags grid;
};

int run_bench(const BenchFlags& f) {
    BenchConfig cfg;
    cfg.scenarios.clear();
    {
        std::stringstream is(f.scenarios);
        std::string tok;
        while (std::getline(is, tok, ',')) {
            try {
                cfg.scenarios.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ConfigError("cannot parse scenario '" + tok + "'");
            }
        }
    }
    cfg.methods.clear();
    {
        std::stringstream is(f.methods);
        std::string tok;
        while (std::getline(is, tok, ',')) cfg.methods.push_back(method_from_name(tok));
    }
    cfg.replicates = f.replicates;
    cfg.base_seed = f.seed;
    cfg.basis = parse_basis(f.basis);
    cfg.degree = f.degree;
    cfg.penalty_order = f.penalty_order;
    cfg.grid = f.grid.build();
    cfg.cv_folds = f.folds;
    cfg.threads = f.threads;

    const BenchResult result = run_benchmark(cfg);

    std::filesystem::create_directories(f.out);
    write_bench_results_csv(std::filesystem::path(f.out) / "bench_results.csv", result);
    write_lambda_samples_csv(std::filesystem::path(f.out) / "lambda_samples.csv", result);

    for (int scenario : cfg.scenarios) {
        for (Method m : cfg.methods) {
            const MethodSummary& s = result.summary(scenario, m);
            std::fprintf(stderr, "bench: scenario %d %-9s mean ISE %10.4f (%.4f) [n=%d]\n",
                         scenario, method_name(m), s.mean_ise, s.std_error, s.n_valid);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatiotemporal p-spline smoothing with automatic Bayesian "
                 "smoothing-parameter selection"};
    app.require_subcommand(1);

    FitFlags fit;
    CLI::App* cmd_fit = app.add_subcommand("fit", "fit a model to a well-sample CSV");
    cmd_fit->add_option("--input", fit.input, "input CSV (well_id,s1,s2,t,value)")->required();
    cmd_fit->add_option("--out", fit.out, "output fit artifact (JSON)")->required();
    cmd_fit->add_option("--trace", fit.trace, "write per-lambda score trace CSV here");
    cmd_fit->add_option("--basis", fit.basis, "basis counts, e.g. 14,8,5")->required();
    cmd_fit->add_option("--degree", fit.degree, "spline degree (default 2)");
    cmd_fit->add_option("--penalty-order", fit.penalty_order, "difference order 1|2 (default 1)");
    cmd_fit->add_option("--method", fit.method,
                        "map|bayes-avg|aicc|gcv|bic|cv-obs|cv-well (default map)");
    cmd_fit->add_option("--transform", fit.transform, "log1p|identity (default log1p)");
    cmd_fit->add_option("--prior-a", fit.prior_a, "inverse-gamma shape (default 1e-4)");
    cmd_fit->add_option("--prior-b", fit.prior_b, "inverse-gamma scale (default 1e-4)");
    cmd_fit->add_option("--lambda-prior", fit.lambda_prior,
                        "uniform|log-uniform prior on lambda (default uniform)");
    cmd_fit->add_option("--folds", fit.folds, "cross-validation folds (default 10)");
    cmd_fit->add_option("--seed", fit.seed, "seed for fold shuffling (default 0)");
    cmd_fit->add_flag("--full-trace", fit.full_trace,
                      "also compute both CV columns of the trace");
    add_grid_flags(cmd_fit, fit.grid);

    PredictFlags pred;
    CLI::App* cmd_predict = app.add_subcommand("predict", "evaluate a fit artifact on a grid");
    cmd_predict->add_option("--artifact", pred.artifact, "fit artifact from `fit`")->required();
    cmd_predict->add_option("--out", pred.out, "output CSV (s1,s2,t,pred[,sd],in_hull)")
        ->required();
    cmd_predict->add_option("--s1-count", pred.s1_count, "s1 axis size (default 50)");
    cmd_predict->add_option("--s2-count", pred.s2_count, "s2 axis size (default 50)");
    cmd_predict->add_option("--t-count", pred.t_count, "t axis size (default 10)");
    cmd_predict->add_option("--at-times", pred.at_times,
                            "comma-separated t snapshots instead of a t axis");
    cmd_predict->add_flag("--sd", pred.sd, "add posterior predictive sd column (needs --input)");
    cmd_predict->add_option("--input", pred.input, "original data CSV (required for --sd)");
    cmd_predict->add_flag("--raw", pred.raw, "add back-transformed pred_raw column");

    SimulateFlags sim;
    CLI::App* cmd_simulate =
        app.add_subcommand("simulate", "generate a synthetic solute-transport dataset");
    cmd_simulate->add_option("--scenario", sim.scenario, "well scenario 1|2|3")->required();
    cmd_simulate->add_option("--seed", sim.seed, "random seed (default 0)");
    cmd_simulate->add_option("--out", sim.out, "output CSV")->required();
    cmd_simulate->add_option("--truth", sim.truth, "also write the PDE ground truth here");
    cmd_simulate->add_option("--snr", sim.snr, "log-scale signal-to-noise ratio (default 10)");

    BenchFlags bench;
    CLI::App* cmd_bench =
        app.add_subcommand("bench", "replicated criterion comparison against the PDE truth");
    cmd_bench->add_option("--scenarios", bench.scenarios, "e.g. 1,2,3 (default all)");
    cmd_bench->add_option("--methods", bench.methods, "e.g. map,aicc,bic (default all)");
    cmd_bench->add_option("--replicates", bench.replicates, "replicates per scenario (default 50)");
    cmd_bench->add_option("--seed", bench.seed, "base seed (default 1)");
    cmd_bench->add_option("--out", bench.out, "output directory")->required();
    cmd_bench->add_option("--basis", bench.basis, "basis counts (default 14,8,5)");
    cmd_bench->add_option("--degree", bench.degree, "spline degree (default 2)");
    cmd_bench->add_option("--penalty-order", bench.penalty_order, "difference order (default 1)");
    cmd_bench->add_option("--folds", bench.folds, "CV folds (default 10)");
    cmd_bench->add_option("--threads", bench.threads, "worker threads (default: all cores)");
    add_grid_flags(cmd_bench, bench.grid);

    try {
        app.parse(argc, argv);
        if (*cmd_fit) return run_fit(fit);
        if (*cmd_predict) return run_predict(pred);
        if (*cmd_simulate) return run_simulate(sim);
        if (*cmd_bench) return run_bench(bench);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gwsmooth::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const gwsmooth::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 3;
    } catch (const gwsmooth::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
