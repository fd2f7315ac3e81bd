#include "gwsmooth/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGoldenTol = 1e-3;  // in log10(lambda)

}  // namespace

LambdaGrid LambdaGrid::linspace(double lo, double hi, int count) {
    if (count < 2 || !(lo < hi)) throw ConfigError("invalid lambda grid bounds");
    LambdaGrid g;
    g.log10_values = Eigen::VectorXd::LinSpaced(count, lo, hi);
    return g;
}

void LambdaGrid::validate() const {
    if (size() < 3) throw ConfigError("lambda grid needs at least 3 points");
    for (int k = 1; k < size(); ++k) {
        if (!(log10_values[k] > log10_values[k - 1])) {
            throw ConfigError("lambda grid must be strictly increasing");
        }
    }
}

const char* method_name(Method m) {
    switch (m) {
        case Method::map: return "map";
        case Method::bayes_avg: return "bayes_avg";
        case Method::aicc: return "aicc";
        case Method::gcv: return "gcv";
        case Method::bic: return "bic";
        case Method::cv_obs: return "cv_obs";
        case Method::cv_well: return "cv_well";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    std::string s = name;
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "map") return Method::map;
    if (s == "bayes_avg") return Method::bayes_avg;
    if (s == "aicc") return Method::aicc;
    if (s == "gcv") return Method::gcv;
    if (s == "bic") return Method::bic;
    if (s == "cv_obs") return Method::cv_obs;
    if (s == "cv_well") return Method::cv_well;
    throw ConfigError("unknown method '" + name + "'");
}

double log_posterior_lambda(const DecomposedModel& model, double lambda,
                            const PriorConfig& prior) {
    if (!(lambda > 0.0)) throw ConfigError("log posterior requires lambda > 0");
    if (!(prior.a > 0.0) || !(prior.b > 0.0)) throw ConfigError("prior a, b must be > 0");
    const LambdaFit fit = model.solve_for_lambda(lambda);
    const double r = model.penalty_rank();
    const double n = model.n();
    double lp = 0.5 * r * std::log(lambda) - 0.5 * fit.log_det -
                (prior.a + 0.5 * n) * std::log(2.0 * prior.b + fit.quad_form);
    if (prior.lambda_prior == LambdaPrior::uniform_on_log_lambda) lp -= std::log(lambda);
    return lp;
}

namespace {

Eigen::VectorXd posterior_over_grid(const DecomposedModel& model, const LambdaGrid& grid,
                                    const PriorConfig& prior) {
    Eigen::VectorXd lp(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        lp[k] = log_posterior_lambda(model, grid.lambda_at(k), prior);
    }
    return lp;
}

}  // namespace

// normalized weights: exp(lp - max) times trapezoid quadrature in d(lambda),
// evaluated on the log10-spaced grid (Jacobian lambda * ln 10 * du)
Eigen::VectorXd posterior_weights_from_log_density(const Eigen::VectorXd& lp,
                                                   const LambdaGrid& grid) {
    const int m = grid.size();
    if (m == 1) return Eigen::VectorXd::Ones(1);
    Eigen::VectorXd w(m);
    const double max_lp = lp.maxCoeff();
    for (int k = 0; k < m; ++k) {
        double du;
        if (k == 0) {
            du = 0.5 * (grid.log10_values[1] - grid.log10_values[0]);
        } else if (k == m - 1) {
            du = 0.5 * (grid.log10_values[m - 1] - grid.log10_values[m - 2]);
        } else {
            du = 0.5 * (grid.log10_values[k + 1] - grid.log10_values[k - 1]);
        }
        w[k] = std::exp(lp[k] - max_lp) * grid.lambda_at(k) * std::numbers::ln10 * du;
    }
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericalError("posterior weights underflowed");
    }
    return w / total;
}

Eigen::VectorXd model_average_weights(const DecomposedModel& model, const LambdaGrid& grid,
                                      const PriorConfig& prior) {
    if (grid.size() < 1) throw ConfigError("empty lambda grid");
    for (int k = 1; k < grid.size(); ++k) {
        if (!(grid.log10_values[k] > grid.log10_values[k - 1])) {
            throw ConfigError("lambda grid must be strictly increasing");
        }
    }
    return posterior_weights_from_log_density(posterior_over_grid(model, grid, prior), grid);
}

SelectionResult map_lambda(const DecomposedModel& model, const LambdaGrid& grid,
                           const PriorConfig& prior) {
    grid.validate();
    SelectionResult res;
    res.method = Method::map;
    res.scores = posterior_over_grid(model, grid, prior);
    res.weights = posterior_weights_from_log_density(res.scores, grid);

    int arg = 0;
    res.scores.maxCoeff(&arg);
    double best_u = grid.log10_values[arg];
    double best_lp = res.scores[arg];
    res.endpoint_warning = (arg == 0 || arg == grid.size() - 1);

    if (!res.endpoint_warning) {
        // golden-section refinement inside the bracketing interval
        const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = grid.log10_values[arg - 1];
        double b = grid.log10_values[arg + 1];
        auto eval = [&](double u) {
            const double lp = log_posterior_lambda(model, std::pow(10.0, u), prior);
            if (lp > best_lp) {
                best_lp = lp;
                best_u = u;
            }
            return lp;
        };
        double c = b - ratio * (b - a);
        double d = a + ratio * (b - a);
        double fc = eval(c);
        double fd = eval(d);
        while (b - a > kGoldenTol) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = eval(d);
            }
        }
    }

    res.lambda = std::pow(10.0, best_u);
    res.edf = model.solve_for_lambda(*res.lambda).edf;
    return res;
}

namespace {

// scoring core shared by criterion_score and the sweeps; returns +inf where
// the criterion is undefined instead of throwing
double criterion_from_fit(const LambdaFit& fit, int n, Criterion which, bool* defined) {
    const double nu = fit.edf;
    const double nn = static_cast<double>(n);
    if (defined) *defined = true;
    switch (which) {
        case Criterion::gcv: {
            const double denom = nn - nu;
            if (!(denom > 0.0)) return kInf;
            return nn * fit.rss / (denom * denom);
        }
        case Criterion::bic:
            return nn * std::log(fit.rss / nn) + nu * std::log(nn);
        case Criterion::aicc: {
            if (!(nn - nu - 2.0 > 0.0)) {
                if (defined) *defined = false;
                return kInf;
            }
            return nn * std::log(fit.rss / nn) + 2.0 * nu +
                   2.0 * nu * (nu + 1.0) / (nn - nu - 1.0);
        }
    }
    return kInf;
}

}  // namespace

double criterion_score(const DecomposedModel& model, double lambda, Criterion which) {
    if (!(lambda > 0.0)) throw ConfigError("criterion requires lambda > 0");
    bool defined = true;
    const double score =
        criterion_from_fit(model.solve_for_lambda(lambda), model.n(), which, &defined);
    if (!defined) {
        throw NumericalError("AICc undefined at this lambda: n - edf - 2 <= 0");
    }
    return score;
}

SelectionResult criterion_minimize(const DecomposedModel& model, const LambdaGrid& grid,
                                   Criterion which) {
    grid.validate();
    SelectionResult res;
    switch (which) {
        case Criterion::aicc: res.method = Method::aicc; break;
        case Criterion::gcv: res.method = Method::gcv; break;
        case Criterion::bic: res.method = Method::bic; break;
    }
    res.scores.resize(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        res.scores[k] =
            criterion_from_fit(model.solve_for_lambda(grid.lambda_at(k)), model.n(), which,
                               nullptr);
    }
    int arg = -1;
    double best = kInf;
    for (int k = 0; k < grid.size(); ++k) {
        if (res.scores[k] < best) {
            best = res.scores[k];
            arg = k;
        }
    }
    if (arg < 0) throw NumericalError("criterion undefined on the whole lambda grid");
    res.lambda = grid.lambda_at(arg);
    res.edf = model.solve_for_lambda(*res.lambda).edf;
    res.endpoint_warning = (arg == 0 || arg == grid.size() - 1);
    return res;
}

std::vector<int> cv_fold_assignment(int n_items, int folds, std::uint64_t seed) {
    std::vector<int> order(static_cast<size_t>(n_items));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(static_cast<size_t>(n_items), 0);
    for (int pos = 0; pos < n_items; ++pos) {
        fold[static_cast<size_t>(order[static_cast<size_t>(pos)])] =
            static_cast<int>((static_cast<long>(pos) * folds) / n_items);
    }
    return fold;
}

namespace {

SparseMat select_rows(const SparseMat& m, const std::vector<int>& rows) {
    std::vector<int> row_map(static_cast<size_t>(m.rows()), -1);
    for (size_t i = 0; i < rows.size(); ++i) row_map[static_cast<size_t>(rows[i])] =
        static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(m, k); it; ++it) {
            const int r = row_map[static_cast<size_t>(it.row())];
            if (r >= 0) trips.emplace_back(r, static_cast<int>(it.col()), it.value());
        }
    }
    SparseMat out(static_cast<int>(rows.size()), static_cast<int>(m.cols()));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] =
        v[idx[i]];
    return out;
}

}  // namespace

SelectionResult cross_validate(const Dataset& ds, const TensorBasisSpec& spec,
                               const LambdaGrid& grid, CvMode mode, int folds,
                               std::uint64_t seed) {
    spec.validate();
    grid.validate();
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > ds.n()) throw ConfigError("more folds than observations");
    if (mode == CvMode::by_well && ds.well_count() < folds) {
        throw ConfigError("well-based cross-validation needs at least as many wells as folds");
    }

    // knots are data-global and fold-invariant: spec is taken as given
    const SparseMat b = tensor_design(ds, spec);
    const Eigen::VectorXd y = working_response(ds);
    const PenaltyReparam reparam(reduce_penalty(difference_penalty(spec)));

    std::vector<int> obs_fold(static_cast<size_t>(ds.n()));
    if (mode == CvMode::by_observation) {
        obs_fold = cv_fold_assignment(ds.n(), folds, seed);
    } else {
        const std::vector<int> well_fold = cv_fold_assignment(ds.well_count(), folds, seed);
        for (int w = 0; w < ds.well_count(); ++w) {
            for (int i : ds.wells()[static_cast<size_t>(w)].obs) {
                obs_fold[static_cast<size_t>(i)] = well_fold[static_cast<size_t>(w)];
            }
        }
    }

    SelectionResult res;
    res.method = (mode == CvMode::by_observation) ? Method::cv_obs : Method::cv_well;
    res.scores = Eigen::VectorXd::Zero(grid.size());
    res.valid_folds = 0;

    for (int f = 0; f < folds; ++f) {
        std::vector<int> train, test;
        for (int i = 0; i < ds.n(); ++i) {
            (obs_fold[static_cast<size_t>(i)] == f ? test : train).push_back(i);
        }
        if (test.empty() || train.empty()) continue;

        std::optional<DecomposedModel> model;
        try {
            model.emplace(select_rows(b, train), reparam, select_entries(y, train));
        } catch (const NumericalError&) {
            res.fold_warning = true;  // e.g. the fold removed all support for the flat block
            continue;
        }
        const SparseMat b_test = select_rows(b, test);
        const Eigen::VectorXd y_test = select_entries(y, test);
        const Eigen::MatrixXd p1 = b_test * model->t1v();
        const Eigen::MatrixXd p2 = b_test * model->t2();

        for (int k = 0; k < grid.size(); ++k) {
            const auto fit = model->solve_compressed(grid.lambda_at(k));
            Eigen::VectorXd pred = p1 * fit.w;
            if (fit.alpha2.size() > 0) pred += p2 * fit.alpha2;
            res.scores[k] += (y_test - pred).squaredNorm();
        }
        ++res.valid_folds;
    }
    if (res.valid_folds == 0) {
        throw NumericalError("all cross-validation folds were invalid");
    }

    int arg = 0;
    res.scores.minCoeff(&arg);
    res.lambda = grid.lambda_at(arg);
    res.endpoint_warning = (arg == 0 || arg == grid.size() - 1);
    return res;
}

FitResult select(const Dataset& ds, const TensorBasisSpec& spec, Method method,
                 const PriorConfig& prior, const LambdaGrid& grid, std::uint64_t seed, int folds,
                 bool full_trace) {
    spec.validate();
    grid.validate();

    const SparseMat b = tensor_design(ds, spec);
    const Eigen::VectorXd y = working_response(ds);
    const DecomposedModel model(b, reduce_penalty(difference_penalty(spec)), y);

    FitResult fit;
    fit.method = method;
    fit.transform = ds.transform();
    fit.n = ds.n();
    fit.prior = prior;

    // diagnostic trace: posterior and the cheap criteria always, CV on demand
    fit.trace.log10_lambda = grid.log10_values;
    fit.trace.map_logpost = posterior_over_grid(model, grid, prior);
    fit.trace.aicc.resize(grid.size());
    fit.trace.gcv.resize(grid.size());
    fit.trace.bic.resize(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const LambdaFit lf = model.solve_for_lambda(grid.lambda_at(k));
        fit.trace.aicc[k] = criterion_from_fit(lf, model.n(), Criterion::aicc, nullptr);
        fit.trace.gcv[k] = criterion_from_fit(lf, model.n(), Criterion::gcv, nullptr);
        fit.trace.bic[k] = criterion_from_fit(lf, model.n(), Criterion::bic, nullptr);
    }
    fit.trace.cv_obs = Eigen::VectorXd::Constant(grid.size(), kNaN);
    fit.trace.cv_well = Eigen::VectorXd::Constant(grid.size(), kNaN);

    SelectionResult sel;
    switch (method) {
        case Method::map:
            sel = map_lambda(model, grid, prior);
            fit.weights = sel.weights;
            break;
        case Method::bayes_avg: {
            sel.method = Method::bayes_avg;
            fit.weights = model_average_weights(model, grid, prior);
            break;
        }
        case Method::aicc: sel = criterion_minimize(model, grid, Criterion::aicc); break;
        case Method::gcv: sel = criterion_minimize(model, grid, Criterion::gcv); break;
        case Method::bic: sel = criterion_minimize(model, grid, Criterion::bic); break;
        case Method::cv_obs:
            sel = cross_validate(ds, spec, grid, CvMode::by_observation, folds, seed);
            fit.trace.cv_obs = sel.scores;
            break;
        case Method::cv_well:
            sel = cross_validate(ds, spec, grid, CvMode::by_well, folds, seed);
            fit.trace.cv_well = sel.scores;
            break;
    }
    if (full_trace) {
        if (fit.trace.cv_obs.hasNaN()) {
            fit.trace.cv_obs =
                cross_validate(ds, spec, grid, CvMode::by_observation, folds, seed).scores;
        }
        if (fit.trace.cv_well.hasNaN()) {
            fit.trace.cv_well =
                cross_validate(ds, spec, grid, CvMode::by_well, folds, seed).scores;
        }
    }

    if (method == Method::bayes_avg) {
        fit.lambda.reset();
        fit.alpha = Eigen::VectorXd::Zero(model.p());
        fit.edf = 0.0;
        for (int k = 0; k < grid.size(); ++k) {
            if (fit.weights[k] == 0.0) continue;
            const LambdaFit lf = model.solve_for_lambda(grid.lambda_at(k));
            fit.alpha += fit.weights[k] * lf.alpha;
            fit.edf += fit.weights[k] * lf.edf;
        }
        fit.rss = (y - b * fit.alpha).squaredNorm();
        fit.quad_form = kNaN;
    } else {
        fit.lambda = sel.lambda;
        const LambdaFit lf = model.solve_for_lambda(*fit.lambda);
        fit.alpha = lf.alpha;
        fit.edf = lf.edf;
        fit.rss = lf.rss;
        fit.quad_form = lf.quad_form;
    }
    fit.endpoint_warning = sel.endpoint_warning;
    fit.fold_warning = sel.fold_warning;
    return fit;
}

}  // namespace gwsmooth
