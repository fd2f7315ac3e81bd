#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "gwsmooth/dataset.hpp"
#include "gwsmooth/decomposition.hpp"
#include "gwsmooth/selection.hpp"
#include "gwsmooth/splines.hpp"

namespace gwsmooth {

/// Regular evaluation grid. Values are flattened with s1 fastest:
/// index(i1,i2,i3) = i1 + n1*(i2 + n2*i3). The hull mask is spatial (one
/// flag per (s1,s2) cell, shared by all time slices).
struct PredictionGrid {
    Eigen::VectorXd s1, s2, t;
    Eigen::VectorXd values;
    std::optional<Eigen::VectorXd> sd;
    std::vector<std::uint8_t> in_hull;  ///< size |s1|*|s2|; all 1 when no hull given

    int index(int i1, int i2, int i3) const {
        return i1 + static_cast<int>(s1.size()) * (i2 + static_cast<int>(s2.size()) * i3);
    }
    double value_at(int i1, int i2, int i3) const { return values[index(i1, i2, i3)]; }
};

/// Pointwise surface evaluation on the working (transformed) scale, or
/// back-transformed when requested. Points outside the knot ranges raise a
/// DataError: the model does not extrapolate.
Eigen::VectorXd predict_points(const FitResult& fit, const TensorBasisSpec& spec,
                               const Eigen::VectorXd& s1, const Eigen::VectorXd& s2,
                               const Eigen::VectorXd& t, bool back_transform = false);

/// Tensor-structured grid evaluation: the three marginal bases are evaluated
/// once per axis and contracted against the coefficient tensor; the full
/// grid design matrix is never materialized.
PredictionGrid predict_grid(const FitResult& fit, const TensorBasisSpec& spec,
                            const Eigen::VectorXd& s1_axis, const Eigen::VectorXd& s2_axis,
                            const Eigen::VectorXd& t_axis,
                            const ConvexPolygon* hull = nullptr, bool back_transform = false);

/// Posterior predictive scale of m(x) at the fit's fixed lambda:
/// sqrt(b*/a* x'(B'B + lambda D'D)^-1 x) with a* = a + n/2,
/// b* = b + y'(I - S)y / 2. Reported on the working scale; unsupported for
/// model-averaged fits.
Eigen::VectorXd predictive_sd(const FitResult& fit, const DecomposedModel& model,
                              const TensorBasisSpec& spec, const Eigen::VectorXd& s1,
                              const Eigen::VectorXd& s2, const Eigen::VectorXd& t);

}  // namespace gwsmooth
