#include "gwsmooth/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

void BenchConfig::validate() const {
    if (replicates < 1) throw ConfigError("benchmark needs at least 1 replicate");
    if (methods.empty()) throw ConfigError("benchmark needs at least one method");
    if (scenarios.empty()) throw ConfigError("benchmark needs at least one scenario");
    for (int s : scenarios) {
        if (s < 1 || s > 3) throw ConfigError("scenario id must be 1, 2 or 3");
    }
    grid.validate();
    if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
}

const std::vector<ReplicateOutcome>& BenchResult::at(int scenario, Method m) const {
    auto it = outcomes.find({scenario, m});
    if (it == outcomes.end()) throw ConfigError("no benchmark outcomes for that pair");
    return it->second;
}

const MethodSummary& BenchResult::summary(int scenario, Method m) const {
    auto it = summaries.find({scenario, m});
    if (it == summaries.end()) throw ConfigError("no benchmark summary for that pair");
    return it->second;
}

namespace {

double posterior_median_lambda(const Eigen::VectorXd& weights, const LambdaGrid& grid) {
    double cum = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
        cum += weights[k];
        if (cum >= 0.5) return grid.lambda_at(k);
    }
    return grid.lambda_at(grid.size() - 1);
}

struct CaseKey {
    int scenario_idx;
    int method_idx;
};

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg) {
    cfg.validate();

    // one shared ground truth; replicates vary the design/noise only
    auto [flow, initial] = default_flow_and_initial(cfg.base_seed);
    const GroundTruth truth = solve_pde(flow, initial);

    // the penalty depends only on counts and order, so its reparametrization
    // is shared by every replicate and fold
    TensorBasisSpec proto = TensorBasisSpec::over_ranges(
        cfg.basis, cfg.degree, cfg.penalty_order, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0});
    const PenaltyReparam reparam(reduce_penalty(difference_penalty(proto)));

    const int n_scen = static_cast<int>(cfg.scenarios.size());
    const int n_meth = static_cast<int>(cfg.methods.size());

    // outcome slots indexed by replicate: parallel execution, ordered results
    std::vector<std::vector<ReplicateOutcome>> slots(
        static_cast<size_t>(cfg.replicates),
        std::vector<ReplicateOutcome>(static_cast<size_t>(n_scen * n_meth)));

    auto run_replicate = [&](int rep) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
        for (int si = 0; si < n_scen; ++si) {
            auto fail_all = [&](const std::string& why) {
                for (int mi = 0; mi < n_meth; ++mi) {
                    ReplicateOutcome& out = slots[static_cast<size_t>(rep)]
                                                 [static_cast<size_t>(si * n_meth + mi)];
                    out.valid = false;
                    out.error = why;
                }
            };
            try {
                ScenarioSpec scen;
                scen.id = cfg.scenarios[static_cast<size_t>(si)];
                scen.seed = seed;
                const Dataset ds = build_scenario(truth, scen);
                const HullRegion hull = convex_hull_region(ds);
                const TensorBasisSpec spec =
                    TensorBasisSpec::for_dataset(ds, cfg.basis, cfg.degree, cfg.penalty_order);
                const SparseMat b = tensor_design(ds, spec);
                const Eigen::VectorXd y = working_response(ds);
                const DecomposedModel model(b, reparam, y);

                for (int mi = 0; mi < n_meth; ++mi) {
                    ReplicateOutcome& out = slots[static_cast<size_t>(rep)]
                                                 [static_cast<size_t>(si * n_meth + mi)];
                    const Method method = cfg.methods[static_cast<size_t>(mi)];
                    try {
                        FitResult fit;
                        fit.method = method;
                        fit.transform = ds.transform();
                        double lambda_sample = 0.0;
                        switch (method) {
                            case Method::map: {
                                const SelectionResult sel = map_lambda(model, cfg.grid, cfg.prior);
                                lambda_sample = *sel.lambda;
                                fit.lambda = sel.lambda;
                                fit.alpha = model.solve_for_lambda(*sel.lambda).alpha;
                                break;
                            }
                            case Method::bayes_avg: {
                                const Eigen::VectorXd w =
                                    model_average_weights(model, cfg.grid, cfg.prior);
                                fit.alpha = Eigen::VectorXd::Zero(model.p());
                                for (int k = 0; k < cfg.grid.size(); ++k) {
                                    if (w[k] == 0.0) continue;
                                    fit.alpha +=
                                        w[k] * model.solve_for_lambda(cfg.grid.lambda_at(k)).alpha;
                                }
                                lambda_sample = posterior_median_lambda(w, cfg.grid);
                                break;
                            }
                            case Method::aicc:
                            case Method::gcv:
                            case Method::bic: {
                                const Criterion which = method == Method::aicc ? Criterion::aicc
                                                        : method == Method::gcv ? Criterion::gcv
                                                                                : Criterion::bic;
                                const SelectionResult sel =
                                    criterion_minimize(model, cfg.grid, which);
                                lambda_sample = *sel.lambda;
                                fit.lambda = sel.lambda;
                                fit.alpha = model.solve_for_lambda(*sel.lambda).alpha;
                                break;
                            }
                            case Method::cv_obs:
                            case Method::cv_well: {
                                const CvMode mode = method == Method::cv_obs
                                                        ? CvMode::by_observation
                                                        : CvMode::by_well;
                                const SelectionResult sel = cross_validate(
                                    ds, spec, cfg.grid, mode, cfg.cv_folds, seed);
                                lambda_sample = *sel.lambda;
                                fit.lambda = sel.lambda;
                                fit.alpha = model.solve_for_lambda(*sel.lambda).alpha;
                                break;
                            }
                        }
                        const SurfaceErrors errors = surface_errors(fit, spec, truth, hull);
                        out.ise = errors.ise;
                        out.max_err = errors.max_abs;
                        out.lambda = lambda_sample;
                        out.valid = true;
                    } catch (const std::exception& e) {
                        out.valid = false;
                        out.error = e.what();
                    }
                }
            } catch (const std::exception& e) {
                fail_all(e.what());
            }
        }
    };

    int threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, cfg.replicates);
    if (threads == 1) {
        for (int rep = 0; rep < cfg.replicates; ++rep) run_replicate(rep);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int rep = next.fetch_add(1); rep < cfg.replicates;
                     rep = next.fetch_add(1)) {
                    run_replicate(rep);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    BenchResult result;
    result.config = cfg;
    for (int si = 0; si < n_scen; ++si) {
        for (int mi = 0; mi < n_meth; ++mi) {
            const std::pair<int, Method> key{cfg.scenarios[static_cast<size_t>(si)],
                                             cfg.methods[static_cast<size_t>(mi)]};
            std::vector<ReplicateOutcome>& outs = result.outcomes[key];
            outs.reserve(static_cast<size_t>(cfg.replicates));
            for (int rep = 0; rep < cfg.replicates; ++rep) {
                outs.push_back(slots[static_cast<size_t>(rep)]
                                    [static_cast<size_t>(si * n_meth + mi)]);
            }

            MethodSummary s;
            double sum = 0.0;
            for (const ReplicateOutcome& o : outs) {
                if (o.valid) {
                    sum += o.ise;
                    ++s.n_valid;
                }
            }
            const int failures = cfg.replicates - s.n_valid;
            if (failures * 10 > cfg.replicates) {
                throw NumericalError(
                    "benchmark failure rate above 10% for scenario " +
                    std::to_string(key.first) + ", method " + method_name(key.second) +
                    (outs.front().error.empty() ? "" : ": " + outs.front().error));
            }
            if (s.n_valid > 0) {
                s.mean_ise = sum / s.n_valid;
                double ss = 0.0;
                for (const ReplicateOutcome& o : outs) {
                    if (o.valid) ss += (o.ise - s.mean_ise) * (o.ise - s.mean_ise);
                }
                s.std_error = s.n_valid > 1
                                  ? std::sqrt(ss / (s.n_valid - 1) / s.n_valid)
                                  : 0.0;
            }
            result.summaries[key] = s;
        }
    }
    return result;
}

void write_bench_results_csv(const std::filesystem::path& path, const BenchResult& result) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << "scenario,method,mean_ise,stderr,n_valid\n";
        char buf[256];
        for (int scenario : result.config.scenarios) {
            for (Method m : result.config.methods) {
                const MethodSummary& s = result.summary(scenario, m);
                std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%d\n", scenario,
                              method_name(m), s.mean_ise, s.std_error, s.n_valid);
                out << buf;
            }
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_lambda_samples_csv(const std::filesystem::path& path, const BenchResult& result) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << "scenario,method,replicate,lambda\n";
        char buf[256];
        for (int scenario : result.config.scenarios) {
            for (Method m : result.config.methods) {
                const std::vector<ReplicateOutcome>& outs = result.at(scenario, m);
                for (size_t rep = 0; rep < outs.size(); ++rep) {
                    if (!outs[rep].valid) continue;
                    std::snprintf(buf, sizeof(buf), "%d,%s,%zu,%.17g\n", scenario,
                                  method_name(m), rep, outs[rep].lambda);
                    out << buf;
                }
            }
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace gwsmooth
