#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwsmooth/decomposition.hpp"
#include "gwsmooth/splines.hpp"

namespace gwsmooth {

enum class LambdaPrior { uniform_on_lambda, uniform_on_log_lambda };

/// Normal-inverse-gamma hyperparameters for the error variance plus the
/// prior placed on the smoothing parameter itself.
struct PriorConfig {
    double a = 1e-4;
    double b = 1e-4;
    LambdaPrior lambda_prior = LambdaPrior::uniform_on_lambda;
};

/// Evaluation grid in log10(lambda); strictly increasing, at least 3 points.
struct LambdaGrid {
    Eigen::VectorXd log10_values;

    static LambdaGrid standard() { return linspace(-8.0, 8.0, 101); }
    static LambdaGrid linspace(double lo, double hi, int count);

    int size() const { return static_cast<int>(log10_values.size()); }
    double lambda_at(int k) const { return std::pow(10.0, log10_values[k]); }
    void validate() const;
};

enum class Method { map, bayes_avg, aicc, gcv, bic, cv_obs, cv_well };
enum class Criterion { aicc, gcv, bic };
enum class CvMode { by_observation, by_well };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

/// Outcome of one selection strategy over a grid.
struct SelectionResult {
    Method method = Method::map;
    std::optional<double> lambda;   ///< absent for model averaging
    Eigen::VectorXd scores;         ///< per-grid-point criterion values / log posterior
    Eigen::VectorXd weights;        ///< normalized posterior weights (Bayesian methods)
    double edf = 0.0;               ///< at the optimum (weighted average for bayes_avg)
    bool endpoint_warning = false;  ///< grid argmax/argmin on a boundary
    bool fold_warning = false;      ///< some CV folds were invalid
    int valid_folds = 0;
};

/// Per-grid-point diagnostic trace. CV columns are NaN unless computed.
struct ScoreTrace {
    Eigen::VectorXd log10_lambda;
    Eigen::VectorXd map_logpost;
    Eigen::VectorXd aicc;
    Eigen::VectorXd gcv;
    Eigen::VectorXd bic;
    Eigen::VectorXd cv_obs;
    Eigen::VectorXd cv_well;
};

/// A fitted model: coefficients on the working response scale plus whatever
/// the chosen strategy produced.
struct FitResult {
    Method method = Method::map;
    Transform transform = Transform::log1p;
    std::optional<double> lambda;  ///< absent for bayes_avg
    Eigen::VectorXd alpha;         ///< chosen-lambda or posterior-averaged coefficients
    Eigen::VectorXd weights;       ///< grid weights (Bayesian methods)
    double edf = 0.0;
    double rss = 0.0;
    double quad_form = 0.0;  ///< y'(I - S)y at the chosen lambda (NaN for bayes_avg)
    int n = 0;
    PriorConfig prior;
    bool endpoint_warning = false;
    bool fold_warning = false;
    ScoreTrace trace;
};

/// Log posterior density of lambda (up to an additive constant):
///   (r/2) log lambda - 1/2 log det(B'B + lambda D'D)
///   - (a + n/2) log(2b + y'(I - S(lambda))y) + log prior(lambda).
double log_posterior_lambda(const DecomposedModel& model, double lambda,
                            const PriorConfig& prior);

/// Grid evaluation of the log posterior followed by golden-section
/// refinement around the grid argmax (tolerance 1e-3 in log10 lambda).
SelectionResult map_lambda(const DecomposedModel& model, const LambdaGrid& grid,
                           const PriorConfig& prior);

/// Normalized posterior weights over the grid, trapezoid quadrature in the
/// prior's natural measure.
Eigen::VectorXd model_average_weights(const DecomposedModel& model, const LambdaGrid& grid,
                                      const PriorConfig& prior);

/// Quadrature step of the averaging: turns log posterior densities (with
/// respect to d lambda) evaluated on the grid into normalized weights.
Eigen::VectorXd posterior_weights_from_log_density(const Eigen::VectorXd& log_density,
                                                   const LambdaGrid& grid);

/// AICc (Hurvich-Tsai), GCV or BIC at one lambda. Throws NumericalError when
/// AICc is undefined (n - edf - 2 <= 0); sweeps report such points as +inf.
double criterion_score(const DecomposedModel& model, double lambda, Criterion which);

/// Grid minimization of one classical criterion.
SelectionResult criterion_minimize(const DecomposedModel& model, const LambdaGrid& grid,
                                   Criterion which);

/// K-fold cross-validation. Folds are seeded shuffles of observations or of
/// whole wells; knots must already be fixed in `spec` (data-global). Each
/// training fold is refit through a fresh decomposition.
SelectionResult cross_validate(const Dataset& ds, const TensorBasisSpec& spec,
                               const LambdaGrid& grid, CvMode mode, int folds = 10,
                               std::uint64_t seed = 0);

/// Seeded fold labels: a uniform shuffle of 0..n-1 dealt into `folds` chunks
/// whose sizes differ by at most one. Used for both observation- and
/// well-level fold assignment.
std::vector<int> cv_fold_assignment(int n_items, int folds, std::uint64_t seed);

/// One-stop selection + fit. `full_trace` additionally fills both CV columns
/// of the trace (costly: 2 x folds extra decompositions).
FitResult select(const Dataset& ds, const TensorBasisSpec& spec, Method method,
                 const PriorConfig& prior = {}, const LambdaGrid& grid = LambdaGrid::standard(),
                 std::uint64_t seed = 0, int folds = 10, bool full_trace = false);

}  // namespace gwsmooth
