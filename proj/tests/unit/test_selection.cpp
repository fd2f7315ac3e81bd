#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gwsmooth/selection.hpp"
#include "oracles.hpp"

using namespace gwsmooth;

namespace {

struct Problem {
    Dataset ds;
    TensorBasisSpec spec;
    SparseMat b;
    SparseMat d_red;
    Eigen::VectorXd y;
    Eigen::MatrixXd bd, dd;
};

Problem small_problem(std::uint64_t seed, int n = 50, std::array<int, 3> counts = {3, 3, 3},
                      int wells = 8, int degree = 2) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Observation> obs;
    for (int i = 0; i < n; ++i) {
        Observation o;
        o.well_id = "W" + std::to_string(i % wells);
        // stable per-well coordinates so the well structure is real
        std::mt19937_64 well_rng(seed * 977 + static_cast<unsigned>(i % wells));
        std::uniform_real_distribution<double> wunif(0.0, 1.0);
        o.s1 = wunif(well_rng);
        o.s2 = wunif(well_rng);
        o.t = unif(rng);
        const double signal = std::sin(6.0 * o.s1) + o.s2 + 0.5 * o.t;
        o.value = std::max(0.0, std::exp(0.5 * (signal + 0.15 * gauss(rng))) - 1.0);
        obs.push_back(std::move(o));
    }
    Problem p{Dataset::from_observations(std::move(obs), Transform::log1p),
              TensorBasisSpec{}, {}, {}, {}, {}, {}};
    p.spec = TensorBasisSpec::for_dataset(p.ds, counts, degree, 1);
    p.b = tensor_design(p.ds, p.spec);
    const SparseMat d = difference_penalty(p.spec);
    p.d_red = reduce_penalty(d);
    p.y = working_response(p.ds);
    p.bd = oracle::dense(p.b);
    p.dd = oracle::dense(d);
    return p;
}

}  // namespace

TEST_CASE("log posterior matches the dense formula") {
    const Problem p = small_problem(21);
    const DecomposedModel model(p.b, p.d_red, p.y);
    PriorConfig prior;
    for (double lambda : {1e-3, 0.3, 7.0, 2e3}) {
        const double got = log_posterior_lambda(model, lambda, prior);
        const double want =
            oracle::dense_log_posterior(p.bd, p.dd, p.y, lambda, prior.a, prior.b);
        CHECK(std::abs(got - want) < 1e-8);
    }
    prior.lambda_prior = LambdaPrior::uniform_on_log_lambda;
    for (double lambda : {1e-2, 5.0}) {
        const double got = log_posterior_lambda(model, lambda, prior);
        const double want =
            oracle::dense_log_posterior(p.bd, p.dd, p.y, lambda, prior.a, prior.b, true);
        CHECK(std::abs(got - want) < 1e-8);
    }
    CHECK_THROWS_AS(log_posterior_lambda(model, 0.0, prior), ConfigError);
}

TEST_CASE("scaling the response moves the MAP by less than one grid step") {
    const Problem p = small_problem(22);
    const LambdaGrid grid = LambdaGrid::standard();
    const DecomposedModel base(p.b, p.d_red, p.y);
    const DecomposedModel scaled(p.b, p.d_red, (10.0 * p.y).eval());
    PriorConfig prior;  // b = 1e-4 ~ 0, so the argmax is nearly scale-free
    const SelectionResult lo = map_lambda(base, grid, prior);
    const SelectionResult hi = map_lambda(scaled, grid, prior);
    const double step = grid.log10_values[1] - grid.log10_values[0];
    CHECK(std::abs(std::log10(*lo.lambda) - std::log10(*hi.lambda)) < step);
}

TEST_CASE("MAP is stable under grid refinement") {
    const Problem p = small_problem(23);
    const DecomposedModel model(p.b, p.d_red, p.y);
    const PriorConfig prior;
    const SelectionResult coarse = map_lambda(model, LambdaGrid::linspace(-8, 8, 81), prior);
    const SelectionResult fine = map_lambda(model, LambdaGrid::linspace(-8, 8, 161), prior);
    const double fine_step = 16.0 / 160.0;
    CHECK(std::abs(std::log10(*coarse.lambda) - std::log10(*fine.lambda)) <= fine_step);
}

TEST_CASE("refined MAP dominates every grid point") {
    const Problem p = small_problem(24);
    const DecomposedModel model(p.b, p.d_red, p.y);
    const PriorConfig prior;
    const LambdaGrid grid = LambdaGrid::standard();
    const SelectionResult res = map_lambda(model, grid, prior);
    const double at_map = log_posterior_lambda(model, *res.lambda, prior);
    CHECK(at_map >= res.scores.maxCoeff());
    CHECK(res.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.weights.minCoeff() >= 0.0);
}

TEST_CASE("posterior weight quadrature") {
    SUBCASE("single point grid gets weight one") {
        LambdaGrid point;
        point.log10_values = Eigen::VectorXd::Constant(1, 0.0);
        const Eigen::VectorXd w =
            posterior_weights_from_log_density(Eigen::VectorXd::Constant(1, -3.0), point);
        REQUIRE(w.size() == 1);
        CHECK(w[0] == doctest::Approx(1.0));
    }
    SUBCASE("lambda-measure Jacobian cancels a 1/lambda density symmetrically") {
        const LambdaGrid grid = LambdaGrid::linspace(-4, 4, 41);
        Eigen::VectorXd lp(grid.size());
        for (int k = 0; k < grid.size(); ++k) {
            const double u = grid.log10_values[k];
            // density ~ exp(-(u/1.5)^2)/lambda with respect to d(lambda)
            lp[k] = -(u / 1.5) * (u / 1.5) - u * std::numbers::ln10;
        }
        const Eigen::VectorXd w = posterior_weights_from_log_density(lp, grid);
        CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int k = 0; k < grid.size(); ++k) {
            CHECK(w[k] == doctest::Approx(w[grid.size() - 1 - k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("model averaging weights normalize over the model posterior") {
    const Problem p = small_problem(25);
    const DecomposedModel model(p.b, p.d_red, p.y);
    const LambdaGrid grid = LambdaGrid::standard();
    const Eigen::VectorXd w = model_average_weights(model, grid, PriorConfig{});
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.minCoeff() >= 0.0);
    int arg = 0;
    w.maxCoeff(&arg);
    CHECK(arg > 0);
    CHECK(arg < grid.size() - 1);
}

TEST_CASE("criterion scores agree with hand-computed formulas") {
    const Problem p = small_problem(26);
    const DecomposedModel model(p.b, p.d_red, p.y);
    const double n = model.n();
    for (double lambda : {0.05, 1.0, 20.0}) {
        const oracle::DenseFit want = oracle::dense_penalized_fit(p.bd, p.dd, p.y, lambda);
        const double gcv_want = n * want.rss / ((n - want.edf) * (n - want.edf));
        const double bic_want = n * std::log(want.rss / n) + want.edf * std::log(n);
        const double aicc_want = n * std::log(want.rss / n) + 2.0 * want.edf +
                                 2.0 * want.edf * (want.edf + 1.0) / (n - want.edf - 1.0);
        CHECK(oracle::rel_err(criterion_score(model, lambda, Criterion::gcv), gcv_want) < 1e-8);
        CHECK(oracle::rel_err(criterion_score(model, lambda, Criterion::bic), bic_want) < 1e-8);
        CHECK(oracle::rel_err(criterion_score(model, lambda, Criterion::aicc), aicc_want) <
              1e-8);
    }
}

TEST_CASE("GCV at huge lambda equals the null-fit formula on centered data") {
    Problem p = small_problem(27);
    Eigen::VectorXd centered = p.y.array() - p.y.mean();
    const DecomposedModel model(p.b, p.d_red, centered);
    const double n = model.n();
    const double tss = centered.squaredNorm();
    const double gcv = criterion_score(model, 1e14, Criterion::gcv);
    const double want = n * tss / ((n - model.flat_dim()) * (n - model.flat_dim()));
    CHECK(oracle::rel_err(gcv, want) < 1e-4);
}

TEST_CASE("AICc is undefined when the fit is too complex") {
    // overcomplete basis: small lambda pushes edf close to n
    const Problem p = small_problem(28, 30, {4, 4, 3}, 30, 1);
    const DecomposedModel model(p.b, p.d_red, p.y);
    const double lambda = 1e-8;
    const double edf = model.solve_for_lambda(lambda).edf;
    REQUIRE(model.n() - edf - 2.0 <= 0.0);
    CHECK_THROWS_AS(criterion_score(model, lambda, Criterion::aicc), NumericalError);
    // sweeps report +inf instead of failing
    const SelectionResult sweep =
        criterion_minimize(model, LambdaGrid::standard(), Criterion::aicc);
    CHECK(std::isinf(sweep.scores[0]));
    CHECK(std::isfinite(*sweep.lambda));
}

TEST_CASE("leave-one-out CV equals brute force refits") {
    const Problem p = small_problem(29, 12, {2, 2, 2}, 4, 1);
    const LambdaGrid grid = LambdaGrid::linspace(-4, 4, 9);
    const SelectionResult cv =
        cross_validate(p.ds, p.spec, grid, CvMode::by_observation, p.ds.n(), 5);
    REQUIRE(cv.valid_folds == p.ds.n());

    for (int k = 0; k < grid.size(); ++k) {
        const double lambda = grid.lambda_at(k);
        double total = 0.0;
        for (int i = 0; i < p.ds.n(); ++i) {
            Eigen::MatrixXd b_train(p.ds.n() - 1, p.bd.cols());
            Eigen::VectorXd y_train(p.ds.n() - 1);
            int row = 0;
            for (int j = 0; j < p.ds.n(); ++j) {
                if (j == i) continue;
                b_train.row(row) = p.bd.row(j);
                y_train[row] = p.y[j];
                ++row;
            }
            const oracle::DenseFit fit =
                oracle::dense_penalized_fit(b_train, p.dd, y_train, lambda);
            const double pred = p.bd.row(i).dot(fit.alpha);
            total += (p.y[i] - pred) * (p.y[i] - pred);
        }
        CHECK(oracle::rel_err(cv.scores[k], total) < 1e-7);
    }
}

TEST_CASE("fold assignment is a seeded partition with balanced sizes") {
    const std::vector<int> folds = cv_fold_assignment(23, 10, 99);
    std::vector<int> sizes(10, 0);
    for (int f : folds) {
        REQUIRE(f >= 0);
        REQUIRE(f < 10);
        ++sizes[static_cast<size_t>(f)];
    }
    for (int s : sizes) {
        CHECK(s >= 2);
        CHECK(s <= 3);
    }
    CHECK(cv_fold_assignment(23, 10, 99) == folds);
    CHECK(cv_fold_assignment(23, 10, 100) != folds);
}

TEST_CASE("duplicated rows leak across folds unless they share one") {
    // each unique row appears twice; place the copies against a known fold
    // assignment so they either share a fold or straddle the two folds
    const Problem base = small_problem(30, 8, {2, 2, 2}, 8, 1);
    const int n = 16;
    const std::uint64_t seed = 5;
    const std::vector<int> fold = cv_fold_assignment(n, 2, seed);
    std::vector<int> fold0, fold1;
    for (int i = 0; i < n; ++i) (fold[static_cast<size_t>(i)] == 0 ? fold0 : fold1).push_back(i);
    REQUIRE(fold0.size() == 8);
    REQUIRE(fold1.size() == 8);

    const std::vector<Observation>& rows = base.ds.observations();
    std::vector<Observation> together_rows(n), split_rows(n);
    for (int pair = 0; pair < 4; ++pair) {
        // copies share fold 0 / fold 1
        together_rows[static_cast<size_t>(fold0[2 * pair])] = rows[static_cast<size_t>(pair)];
        together_rows[static_cast<size_t>(fold0[2 * pair + 1])] = rows[static_cast<size_t>(pair)];
        together_rows[static_cast<size_t>(fold1[2 * pair])] = rows[static_cast<size_t>(pair + 4)];
        together_rows[static_cast<size_t>(fold1[2 * pair + 1])] =
            rows[static_cast<size_t>(pair + 4)];
    }
    for (int u = 0; u < 8; ++u) {
        // one copy in each fold
        split_rows[static_cast<size_t>(fold0[u])] = rows[static_cast<size_t>(u)];
        split_rows[static_cast<size_t>(fold1[u])] = rows[static_cast<size_t>(u)];
    }
    const Dataset ds_together = Dataset::from_observations(together_rows, Transform::log1p);
    const Dataset ds_split = Dataset::from_observations(split_rows, Transform::log1p);

    const LambdaGrid grid = LambdaGrid::linspace(-4, 4, 9);
    const SelectionResult together =
        cross_validate(ds_together, base.spec, grid, CvMode::by_observation, 2, seed);
    const SelectionResult split =
        cross_validate(ds_split, base.spec, grid, CvMode::by_observation, 2, seed);
    // a duplicate in the training fold makes the held-out copy look easy
    CHECK((together.scores - split.scores).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("well-based folds move whole wells") {
    const Problem p = small_problem(31, 40, {3, 3, 2}, 8, 1);
    const LambdaGrid grid = LambdaGrid::linspace(-4, 4, 9);
    const SelectionResult by_well = cross_validate(p.ds, p.spec, grid, CvMode::by_well, 4, 3);
    const SelectionResult by_obs =
        cross_validate(p.ds, p.spec, grid, CvMode::by_observation, 4, 3);
    CHECK(by_well.valid_folds == 4);
    CHECK((by_well.scores - by_obs.scores).cwiseAbs().maxCoeff() > 1e-10);
    CHECK_THROWS_AS(cross_validate(p.ds, p.spec, grid, CvMode::by_well, 9, 3), ConfigError);
}

TEST_CASE("select is deterministic and fills the diagnostic trace") {
    const Problem p = small_problem(32, 60, {3, 3, 3}, 10);
    const LambdaGrid grid = LambdaGrid::linspace(-6, 6, 25);
    const FitResult a = select(p.ds, p.spec, Method::cv_well, PriorConfig{}, grid, 7, 4);
    const FitResult b = select(p.ds, p.spec, Method::cv_well, PriorConfig{}, grid, 7, 4);
    CHECK(a.lambda == b.lambda);
    CHECK((a.alpha - b.alpha).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.trace.cv_well == b.trace.cv_well);
    CHECK(!a.trace.cv_well.hasNaN());
    CHECK(a.trace.cv_obs.hasNaN());  // not computed unless requested
    CHECK(!a.trace.map_logpost.hasNaN());
    CHECK(!a.trace.bic.hasNaN());

    const FitResult full =
        select(p.ds, p.spec, Method::map, PriorConfig{}, grid, 7, 4, /*full_trace=*/true);
    CHECK(!full.trace.cv_obs.hasNaN());
    CHECK(!full.trace.cv_well.hasNaN());
}

TEST_CASE("model averaging composes solutions linearly") {
    const Problem p = small_problem(33, 55, {3, 3, 3}, 9);
    const LambdaGrid grid = LambdaGrid::linspace(-6, 6, 31);
    const FitResult avg = select(p.ds, p.spec, Method::bayes_avg, PriorConfig{}, grid, 0, 10);
    CHECK(!avg.lambda.has_value());
    CHECK(avg.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

    const DecomposedModel model(p.b, p.d_red, p.y);
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(model.p());
    for (int k = 0; k < grid.size(); ++k) {
        manual += avg.weights[k] * model.solve_for_lambda(grid.lambda_at(k)).alpha;
    }
    CHECK(oracle::rel_err(avg.alpha, manual) < 1e-12);
}

TEST_CASE("score trace minima bracket the selected lambda") {
    const Problem p = small_problem(34, 70, {3, 3, 3}, 9);
    const LambdaGrid grid = LambdaGrid::linspace(-8, 8, 41);
    const FitResult fit = select(p.ds, p.spec, Method::gcv, PriorConfig{}, grid, 0, 10);
    int arg = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.size(); ++k) {
        if (fit.trace.gcv[k] < best) {
            best = fit.trace.gcv[k];
            arg = k;
        }
    }
    CHECK(grid.lambda_at(arg) == doctest::Approx(*fit.lambda));
}
