#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>

#include "gwsmooth/dataset.hpp"

namespace gwsmooth {

using SparseMat = Eigen::SparseMatrix<double>;

/// One marginal B-spline basis: `count` functions of the given degree over
/// [lo, hi]. Knots are equally spaced over the range with the boundary knots
/// replicated (degree+1 copies), so exactly `count` functions span the range
/// and they sum to one everywhere on it.
struct DimensionBasis {
    int count = 0;
    int degree = 2;
    double lo = 0.0;
    double hi = 1.0;
};

/// Trivariate tensor-product configuration (easting, northing, time) plus the
/// difference-penalty order. Coefficients are flattened with dimension 1
/// fastest: index(j,k,l) = j + p1*(k + p2*l).
struct TensorBasisSpec {
    std::array<DimensionBasis, 3> dim;
    int penalty_order = 1;

    int coef_count() const { return dim[0].count * dim[1].count * dim[2].count; }
    void validate() const;

    /// Knot ranges taken from the dataset's coordinate ranges.
    static TensorBasisSpec for_dataset(const Dataset& ds, const std::array<int, 3>& counts,
                                       int degree = 2, int penalty_order = 1);
    static TensorBasisSpec over_ranges(const std::array<int, 3>& counts, int degree,
                                       int penalty_order, CoordRange s1, CoordRange s2,
                                       CoordRange t);
};

/// Rows of B-spline basis function values, |x| x count, at most degree+1
/// nonzeros per row. Points must lie in [lo, hi]; the top boundary belongs to
/// the last knot span.
SparseMat bspline_basis_1d(const Eigen::VectorXd& x, const DimensionBasis& basis);

/// Design matrix for arbitrary evaluation points: row i holds
/// phi_j(s1_i)*phi_k(s2_i)*phi_l(t_i) over all (j,k,l).
SparseMat tensor_design_points(const Eigen::VectorXd& s1, const Eigen::VectorXd& s2,
                               const Eigen::VectorXd& t, const TensorBasisSpec& spec);

/// Design matrix of a dataset (n x p).
SparseMat tensor_design(const Dataset& ds, const TensorBasisSpec& spec);

/// Stacked q-th order difference operators, one block per dimension, acting
/// along that dimension and leaving the others fixed. The Gram matrix D'D is
/// the Kronecker sum of the marginal penalties.
SparseMat difference_penalty(const TensorBasisSpec& spec);

/// Dimension of null(D'D): coefficient tensors polynomial of degree < q along
/// every axis, i.e. q^3 for the trivariate basis (1 for q=1).
int penalty_null_space_dim(const TensorBasisSpec& spec);

/// Closed-form nonzero count of difference_penalty(spec).
long penalty_nnz(const TensorBasisSpec& spec);

}  // namespace gwsmooth
