#include "gwsmooth/predict.hpp"

#include <cmath>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

Eigen::VectorXd predict_points(const FitResult& fit, const TensorBasisSpec& spec,
                               const Eigen::VectorXd& s1, const Eigen::VectorXd& s2,
                               const Eigen::VectorXd& t, bool back_transform) {
    if (fit.alpha.size() != spec.coef_count()) {
        throw ConfigError("fit coefficients do not match the basis spec");
    }
    const SparseMat b = tensor_design_points(s1, s2, t, spec);
    Eigen::VectorXd pred = b * fit.alpha;
    if (back_transform) {
        for (Eigen::Index i = 0; i < pred.size(); ++i) {
            pred[i] = back_transform_value(pred[i], fit.transform);
        }
    }
    return pred;
}

PredictionGrid predict_grid(const FitResult& fit, const TensorBasisSpec& spec,
                            const Eigen::VectorXd& s1_axis, const Eigen::VectorXd& s2_axis,
                            const Eigen::VectorXd& t_axis, const ConvexPolygon* hull,
                            bool back_transform) {
    if (fit.alpha.size() != spec.coef_count()) {
        throw ConfigError("fit coefficients do not match the basis spec");
    }
    const int n1 = static_cast<int>(s1_axis.size());
    const int n2 = static_cast<int>(s2_axis.size());
    const int n3 = static_cast<int>(t_axis.size());
    if (n1 == 0 || n2 == 0 || n3 == 0) throw ConfigError("empty prediction axis");
    const int p1 = spec.dim[0].count, p2 = spec.dim[1].count, p3 = spec.dim[2].count;

    const Eigen::MatrixXd b1 = Eigen::MatrixXd(bspline_basis_1d(s1_axis, spec.dim[0]));
    const Eigen::MatrixXd b2 = Eigen::MatrixXd(bspline_basis_1d(s2_axis, spec.dim[1]));
    const Eigen::MatrixXd b3 = Eigen::MatrixXd(bspline_basis_1d(t_axis, spec.dim[2]));

    // contract one mode at a time: (p1,p2*p3) -> (n1,p2*p3) -> ... -> (n1*n2,n3)
    Eigen::Map<const Eigen::MatrixXd> coef(fit.alpha.data(), p1, p2 * p3);
    Eigen::MatrixXd stage1 = b1 * coef;  // n1 x (p2*p3)

    Eigen::MatrixXd stage2(n1 * p3, p2);  // gather mode-2 fibers
    for (int l = 0; l < p3; ++l) {
        for (int k = 0; k < p2; ++k) {
            stage2.block(l * n1, k, n1, 1) = stage1.col(k + p2 * l);
        }
    }
    Eigen::MatrixXd stage2t = stage2 * b2.transpose();  // (n1*p3) x n2

    PredictionGrid grid;
    grid.s1 = s1_axis;
    grid.s2 = s2_axis;
    grid.t = t_axis;
    grid.values.resize(static_cast<Eigen::Index>(n1) * n2 * n3);
    for (int i2 = 0; i2 < n2; ++i2) {
        // mode-3 contraction for one s2 slice: (n1 x p3) * b3'
        Eigen::Map<const Eigen::MatrixXd> slice(stage2t.col(i2).data(), n1, p3);
        Eigen::MatrixXd out = slice * b3.transpose();  // n1 x n3
        for (int i3 = 0; i3 < n3; ++i3) {
            grid.values.segment(static_cast<Eigen::Index>(i3) * n1 * n2 + i2 * n1, n1) =
                out.col(i3);
        }
    }

    if (back_transform) {
        for (Eigen::Index i = 0; i < grid.values.size(); ++i) {
            grid.values[i] = back_transform_value(grid.values[i], fit.transform);
        }
    }

    grid.in_hull.assign(static_cast<size_t>(n1) * n2, 1);
    if (hull != nullptr) {
        for (int i2 = 0; i2 < n2; ++i2) {
            for (int i1 = 0; i1 < n1; ++i1) {
                grid.in_hull[static_cast<size_t>(i1) + static_cast<size_t>(n1) * i2] =
                    hull->contains(s1_axis[i1], s2_axis[i2]) ? 1 : 0;
            }
        }
    }
    return grid;
}

Eigen::VectorXd predictive_sd(const FitResult& fit, const DecomposedModel& model,
                              const TensorBasisSpec& spec, const Eigen::VectorXd& s1,
                              const Eigen::VectorXd& s2, const Eigen::VectorXd& t) {
    if (!fit.lambda.has_value()) {
        throw ConfigError("predictive sd is only available for fixed-lambda fits, "
                          "not model-averaged ones");
    }
    if (fit.alpha.size() != spec.coef_count() || model.p() != spec.coef_count()) {
        throw ConfigError("fit, model and basis spec are inconsistent");
    }
    const double a_star = fit.prior.a + 0.5 * model.n();
    const double b_star = fit.prior.b + 0.5 * fit.quad_form;
    const double scale = b_star / a_star;

    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows(
        tensor_design_points(s1, s2, t, spec));
    Eigen::VectorXd sd(rows.rows());
    Eigen::VectorXd x(model.p());
    for (int i = 0; i < rows.rows(); ++i) {
        x.setZero();
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, i); it; ++it) {
            x[it.col()] = it.value();
        }
        sd[i] = std::sqrt(scale * model.quad_inverse_form(*fit.lambda, x));
    }
    return sd;
}

}  // namespace gwsmooth
