#include <doctest.h>

#include <cmath>
#include <random>

#include "gwsmooth/decomposition.hpp"
#include "gwsmooth/splines.hpp"
#include "oracles.hpp"

using namespace gwsmooth;

namespace {

struct Instance {
    SparseMat b;
    SparseMat d;
    Eigen::VectorXd y;
    TensorBasisSpec spec;
};

// a real spline design over random points: small enough for dense oracles
Instance random_instance(std::array<int, 3> counts, int degree, int q, int n,
                         std::uint64_t seed) {
    Instance inst;
    inst.spec =
        TensorBasisSpec::over_ranges(counts, degree, q, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd s1(n), s2(n), t(n);
    for (int i = 0; i < n; ++i) {
        s1[i] = unif(rng);
        s2[i] = unif(rng);
        t[i] = unif(rng);
    }
    inst.b = tensor_design_points(s1, s2, t, inst.spec);
    inst.d = reduce_penalty(difference_penalty(inst.spec));
    inst.y = oracle::random_vector(n, rng);
    return inst;
}

}  // namespace

TEST_CASE("reduce_penalty keeps a full-row-rank matrix unchanged") {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < 3; ++i) {
        trips.emplace_back(i, i, -1.0);
        trips.emplace_back(i, i + 1, 1.0);
    }
    SparseMat delta(3, 4);
    delta.setFromTriplets(trips.begin(), trips.end());
    const SparseMat red = reduce_penalty(delta);
    CHECK(red.rows() == 3);
    CHECK((oracle::dense(red) - oracle::dense(delta)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reduce_penalty collapses duplicated rows and preserves the quadratic form") {
    std::vector<Eigen::Triplet<double>> trips;
    for (int copy = 0; copy < 2; ++copy) {
        for (int i = 0; i < 3; ++i) {
            trips.emplace_back(copy * 3 + i, i, -1.0);
            trips.emplace_back(copy * 3 + i, i + 1, 1.0);
        }
    }
    SparseMat stacked(6, 4);
    stacked.setFromTriplets(trips.begin(), trips.end());
    const SparseMat red = reduce_penalty(stacked);
    CHECK(red.rows() == 3);  // rank of the stacked operator

    std::mt19937_64 rng(1);
    for (int probe = 0; probe < 5; ++probe) {
        const Eigen::VectorXd v = oracle::random_vector(4, rng);
        const double full = (stacked * v).squaredNorm();
        CHECK(oracle::rel_err((red * v).squaredNorm(), full) < 1e-12);
    }
}

TEST_CASE("reduce_penalty on the tensor q=1 penalty has rank p-1") {
    const TensorBasisSpec spec =
        TensorBasisSpec::over_ranges({3, 3, 3}, 1, 1, {0, 1}, {0, 1}, {0, 1});
    const SparseMat red = reduce_penalty(difference_penalty(spec));
    CHECK(red.rows() == 26);
    CHECK(oracle::dense_rank(oracle::dense(red)) == 26);
}

TEST_CASE("reduce_penalty handles the q=2 tensor penalty") {
    const TensorBasisSpec spec =
        TensorBasisSpec::over_ranges({4, 4, 3}, 2, 2, {0, 1}, {0, 1}, {0, 1});
    const SparseMat d = difference_penalty(spec);
    const SparseMat red = reduce_penalty(d);
    CHECK(red.rows() == spec.coef_count() - penalty_null_space_dim(spec));
    std::mt19937_64 rng(2);
    for (int probe = 0; probe < 5; ++probe) {
        const Eigen::VectorXd v = oracle::random_vector(spec.coef_count(), rng);
        CHECK(oracle::rel_err((red * v).squaredNorm(), (d * v).squaredNorm()) < 1e-10);
    }
}

TEST_CASE("all-zero penalty is rejected") {
    SparseMat zero(3, 4);
    CHECK_THROWS_AS(reduce_penalty(zero), ConfigError);
}

TEST_CASE("random dense design with a tensor penalty matches the dense solver") {
    // 50 x 8 random design, tensor (2,2,2) q=1 penalty
    const TensorBasisSpec spec =
        TensorBasisSpec::over_ranges({2, 2, 2}, 1, 1, {0, 1}, {0, 1}, {0, 1});
    std::mt19937_64 rng(33);
    Eigen::MatrixXd bd(50, 8);
    for (int i = 0; i < bd.rows(); ++i) bd.row(i) = oracle::random_vector(8, rng).transpose();
    const SparseMat b = bd.sparseView();
    const SparseMat d_red = reduce_penalty(difference_penalty(spec));
    const Eigen::VectorXd y = oracle::random_vector(50, rng);

    const DecomposedModel model(b, d_red, y);
    const Eigen::MatrixXd dd = oracle::dense(difference_penalty(spec));
    for (double lambda : {1e-3, 0.1, 1.0, 42.0, 1e3}) {
        const LambdaFit fit = model.solve_for_lambda(lambda);
        const oracle::DenseFit want = oracle::dense_penalized_fit(bd, dd, y, lambda);
        CHECK(oracle::rel_err(fit.alpha, want.alpha) < 1e-8);
    }
}

TEST_CASE("decomposition matches the dense oracle on random spline instances") {
    struct Config {
        std::array<int, 3> counts;
        int degree;
        int q;
        int n;
    };
    const std::vector<Config> configs{
        {{3, 3, 3}, 2, 1, 50}, {{3, 3, 3}, 2, 2, 55}, {{4, 3, 2}, 1, 1, 40},
        {{4, 4, 3}, 2, 2, 60}, {{5, 3, 2}, 1, 1, 45}, {{3, 4, 2}, 1, 1, 58},
    };
    const std::vector<double> lambdas{1e-4, 1e-2, 1.0, 1e2, 1e4};
    int checked = 0;
    for (size_t c = 0; c < configs.size(); ++c) {
        const Instance inst =
            random_instance(configs[c].counts, configs[c].degree, configs[c].q, configs[c].n,
                            100 + c);
        const DecomposedModel model(inst.b, inst.d, inst.y);
        const Eigen::MatrixXd bd = oracle::dense(inst.b);
        const Eigen::MatrixXd dd = oracle::dense(inst.d);
        CHECK(model.flat_dim() == penalty_null_space_dim(inst.spec));
        for (double lambda : lambdas) {
            const LambdaFit fit = model.solve_for_lambda(lambda);
            const oracle::DenseFit want = oracle::dense_penalized_fit(bd, dd, inst.y, lambda);
            CHECK(oracle::rel_err(fit.alpha, want.alpha) < 1e-8);
            CHECK(oracle::rel_err(fit.rss, want.rss) < 1e-8);
            CHECK(oracle::rel_err(fit.quad_form, want.quad_form) < 1e-8);
            CHECK(oracle::rel_err(fit.log_det, want.log_det) < 1e-8);
            CHECK(oracle::rel_err(fit.edf, want.edf) < 1e-8);
            ++checked;
        }
    }
    CHECK(checked == static_cast<int>(configs.size() * lambdas.size()));
}

TEST_CASE("huge lambda shrinks to the flat-prior fit") {
    const Instance inst = random_instance({4, 3, 3}, 2, 1, 50, 7);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    const LambdaFit fit = model.solve_for_lambda(1e14);
    CHECK(model.flat_dim() == 1);
    CHECK(fit.edf == doctest::Approx(1.0).epsilon(1e-6));
    // q=1 null space is the constant surface: fitted values are all equal
    const Eigen::VectorXd fitted = inst.b * fit.alpha;
    CHECK((fitted.array() - fitted.mean()).abs().maxCoeff() < 1e-8);
}

TEST_CASE("lambda zero reproduces OLS when the design has full rank") {
    // n > p and a well-spread design
    const Instance inst = random_instance({3, 3, 3}, 1, 1, 60, 8);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    const LambdaFit fit = model.solve_for_lambda(0.0);
    const Eigen::MatrixXd bd = oracle::dense(inst.b);
    const Eigen::VectorXd ols =
        (bd.transpose() * bd).ldlt().solve(bd.transpose() * inst.y);
    CHECK(oracle::rel_err(fit.alpha, ols) < 1e-8);
    CHECK(fit.edf == doctest::Approx(27.0).epsilon(1e-9));
}

TEST_CASE("determinant identity on a crafted two-singular-value instance") {
    // B = diag(2,1), D = I: singular values are exactly (2,1)
    Eigen::MatrixXd bd = Eigen::MatrixXd::Zero(2, 2);
    bd(0, 0) = 2.0;
    bd(1, 1) = 1.0;
    SparseMat b = bd.sparseView();
    SparseMat d(2, 2);
    d.setIdentity();
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
    const DecomposedModel model(b, d, y);
    REQUIRE(model.singular_count() == 2);
    CHECK(model.singular_values()[0] == doctest::Approx(2.0));
    CHECK(model.singular_values()[1] == doctest::Approx(1.0));
    // det(L'L + I) = (4+1)(1+1) = 10
    CHECK(model.solve_for_lambda(1.0).log_det == doctest::Approx(std::log(10.0)));
}

TEST_CASE("shrinkage factors sum to the edf minus the flat block") {
    const Instance inst = random_instance({3, 3, 2}, 1, 1, 45, 9);
    const DecomposedModel model(inst.b, inst.d, inst.y);

    CHECK(model.shrinkage_factors(0.0).maxCoeff() == doctest::Approx(1.0));
    CHECK(model.shrinkage_factors(0.0).minCoeff() == doctest::Approx(1.0));

    const double s1 = model.singular_values()[0];
    CHECK(model.shrinkage_factors(s1 * s1)[0] == doctest::Approx(0.5));

    const Eigen::MatrixXd bd = oracle::dense(inst.b);
    const Eigen::MatrixXd dd = oracle::dense(inst.d);
    for (double lambda : {0.05, 2.0, 300.0}) {
        const double edf_dense = oracle::dense_penalized_fit(bd, dd, inst.y, lambda).edf;
        const double edf_fast = model.shrinkage_factors(lambda).sum() + model.flat_dim();
        CHECK(oracle::rel_err(edf_fast, edf_dense) < 1e-8);
        for (double f : model.shrinkage_factors(lambda)) {
            CHECK(f > 0.0);
            CHECK(f <= 1.0);
        }
    }
}

TEST_CASE("edf decreases strictly in lambda within (flat_dim, p]") {
    const Instance inst = random_instance({4, 3, 3}, 2, 1, 55, 10);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = -8; k <= 8; ++k) {
        const double edf = model.solve_for_lambda(std::pow(10.0, k)).edf;
        CHECK(edf < prev);
        CHECK(edf > model.flat_dim());
        CHECK(edf <= model.p() + 1e-9);
        prev = edf;
    }
}

TEST_CASE("log determinant stays finite for positive lambda") {
    // underdetermined: more penalized directions than observations
    const Instance inst = random_instance({4, 4, 3}, 2, 1, 20, 11);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    CHECK(model.penalty_rank() > model.singular_count());
    for (double lambda : {1e-8, 1e-3, 1.0, 1e6}) {
        CHECK(std::isfinite(model.solve_for_lambda(lambda).log_det));
    }
    CHECK_THROWS_AS(model.solve_for_lambda(0.0), NumericalError);
}

TEST_CASE("fitted values reconstructed through the rotated blocks") {
    const Instance inst = random_instance({3, 4, 3}, 2, 1, 50, 12);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    for (double lambda : {1e-2, 1.0, 1e3}) {
        const Eigen::VectorXd direct = inst.b * model.solve_for_lambda(lambda).alpha;
        const Eigen::VectorXd rotated = model.fitted_from_rotated(lambda);
        CHECK((direct - rotated).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("solve_for_lambda performs no further factorization passes") {
    const Instance inst = random_instance({4, 3, 3}, 2, 1, 50, 13);
    reset_factorization_passes();
    const DecomposedModel model(inst.b, inst.d, inst.y);
    CHECK(factorization_passes() == 1);
    for (int k = 0; k < 100; ++k) {
        (void)model.solve_for_lambda(0.5 + k);
    }
    CHECK(factorization_passes() == 1);
}

TEST_CASE("quad_inverse_form matches the dense inverse") {
    const Instance inst = random_instance({3, 3, 3}, 2, 2, 50, 14);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    const Eigen::MatrixXd bd = oracle::dense(inst.b);
    const Eigen::MatrixXd dd = oracle::dense(inst.d);
    std::mt19937_64 rng(15);
    for (double lambda : {1e-2, 1.0, 1e3}) {
        for (int probe = 0; probe < 3; ++probe) {
            const Eigen::VectorXd v = oracle::random_vector(model.p(), rng);
            const double got = model.quad_inverse_form(lambda, v);
            const double want = oracle::dense_quad_inverse_form(bd, dd, lambda, v);
            CHECK(oracle::rel_err(got, want) < 1e-8);
        }
    }
}

TEST_CASE("negative lambda is rejected") {
    const Instance inst = random_instance({3, 3, 2}, 1, 1, 30, 16);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    CHECK_THROWS_AS(model.solve_for_lambda(-1.0), ConfigError);
}

TEST_CASE("a design that cannot identify the flat block is rejected") {
    // q=2 null space contains the s1 ramp; observations at a single s1
    // location leave it unidentified
    const TensorBasisSpec spec =
        TensorBasisSpec::over_ranges({4, 4, 4}, 1, 2, {0, 1}, {0, 1}, {0, 1});
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = 40;
    Eigen::VectorXd s1 = Eigen::VectorXd::Constant(n, 0.5);
    Eigen::VectorXd s2(n), t(n);
    for (int i = 0; i < n; ++i) {
        s2[i] = unif(rng);
        t[i] = unif(rng);
    }
    const SparseMat b = tensor_design_points(s1, s2, t, spec);
    const SparseMat d_red = reduce_penalty(difference_penalty(spec));
    const Eigen::VectorXd y = oracle::random_vector(n, rng);
    CHECK_THROWS_AS(DecomposedModel(b, d_red, y), NumericalError);
}

TEST_CASE("pure ridge pipeline when the penalty has full column rank") {
    // D = I on a small dense design: no flat block
    std::mt19937_64 rng(18);
    Eigen::MatrixXd bd(20, 6);
    for (int i = 0; i < bd.rows(); ++i) bd.row(i) = oracle::random_vector(6, rng).transpose();
    SparseMat d(6, 6);
    d.setIdentity();
    const Eigen::VectorXd y = oracle::random_vector(20, rng);
    const DecomposedModel model(bd.sparseView(), d, y);
    CHECK(model.flat_dim() == 0);
    for (double lambda : {1e-2, 1.0, 50.0}) {
        const LambdaFit fit = model.solve_for_lambda(lambda);
        const oracle::DenseFit want =
            oracle::dense_penalized_fit(bd, Eigen::MatrixXd::Identity(6, 6), y, lambda);
        CHECK(oracle::rel_err(fit.alpha, want.alpha) < 1e-10);
        CHECK(oracle::rel_err(fit.edf, want.edf) < 1e-10);
    }
}

TEST_CASE("a moderately large design identifies a single flat direction") {
    const Instance inst = random_instance({14, 8, 5}, 2, 1, 300, 19);
    const DecomposedModel model(inst.b, inst.d, inst.y);
    CHECK(model.p() == 560);
    CHECK(model.flat_dim() == 1);
    CHECK(model.penalty_rank() == 559);
    CHECK(model.singular_count() == 299);
}
