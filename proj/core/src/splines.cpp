#include "gwsmooth/splines.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

void TensorBasisSpec::validate() const {
    for (int d = 0; d < 3; ++d) {
        const DimensionBasis& b = dim[static_cast<size_t>(d)];
        if (b.degree < 0) throw ConfigError("spline degree must be >= 0");
        if (b.count < b.degree + 1) {
            throw ConfigError("dimension " + std::to_string(d + 1) + ": basis count " +
                              std::to_string(b.count) + " must be >= degree+1 = " +
                              std::to_string(b.degree + 1));
        }
        if (!(b.lo < b.hi)) {
            throw ConfigError("dimension " + std::to_string(d + 1) +
                              ": knot range must satisfy lo < hi");
        }
        if (penalty_order >= b.count) {
            throw ConfigError("penalty order " + std::to_string(penalty_order) +
                              " must be < basis count " + std::to_string(b.count));
        }
    }
    if (penalty_order < 1 || penalty_order > 2) {
        throw ConfigError("penalty order must be 1 or 2");
    }
}

TensorBasisSpec TensorBasisSpec::over_ranges(const std::array<int, 3>& counts, int degree,
                                             int penalty_order, CoordRange s1, CoordRange s2,
                                             CoordRange t) {
    TensorBasisSpec spec;
    spec.dim[0] = DimensionBasis{counts[0], degree, s1.lo, s1.hi};
    spec.dim[1] = DimensionBasis{counts[1], degree, s2.lo, s2.hi};
    spec.dim[2] = DimensionBasis{counts[2], degree, t.lo, t.hi};
    spec.penalty_order = penalty_order;
    spec.validate();
    return spec;
}

TensorBasisSpec TensorBasisSpec::for_dataset(const Dataset& ds, const std::array<int, 3>& counts,
                                             int degree, int penalty_order) {
    auto widen = [](CoordRange r) {
        // a degenerate coordinate (all samples equal) still needs a usable span
        if (r.lo == r.hi) {
            const double pad = std::max(1.0, std::abs(r.lo)) * 1e-6;
            return CoordRange{r.lo - pad, r.hi + pad};
        }
        return r;
    };
    return over_ranges(counts, degree, penalty_order, widen(ds.s1_range()), widen(ds.s2_range()),
                       widen(ds.t_range()));
}

namespace {

// clamped knot vector: interior knots equally spaced, boundary knots with
// multiplicity degree+1; length count + degree + 1
std::vector<double> knot_vector(const DimensionBasis& b) {
    const int nseg = b.count - b.degree;
    const double h = (b.hi - b.lo) / nseg;
    std::vector<double> t(static_cast<size_t>(b.count + b.degree + 1));
    for (int i = 0; i < static_cast<int>(t.size()); ++i) {
        const int j = std::clamp(i - b.degree, 0, nseg);
        t[static_cast<size_t>(i)] = (j == nseg) ? b.hi : b.lo + h * j;
    }
    return t;
}

struct BasisRow {
    int first_col = 0;
    // values[r] is the basis function first_col + r evaluated at x
    std::array<double, 16> values{};
    int count = 0;
};

// Cox-de Boor evaluation of the degree+1 basis functions that are nonzero at
// x. Half-open spans, closed at the top boundary.
BasisRow evaluate_basis(double x, const DimensionBasis& b, const std::vector<double>& knots) {
    const int nseg = b.count - b.degree;
    const double h = (b.hi - b.lo) / nseg;
    const double tol = 1e-9 * std::max(1.0, std::abs(b.hi - b.lo));
    if (x < b.lo - tol || x > b.hi + tol) {
        throw DataError("point " + std::to_string(x) + " outside basis range [" +
                        std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
    }
    x = std::clamp(x, b.lo, b.hi);
    int span = b.degree + std::min(nseg - 1, static_cast<int>((x - b.lo) / h));

    BasisRow row;
    row.count = b.degree + 1;
    row.first_col = span - b.degree;

    double left[16], right[16];
    row.values[0] = 1.0;
    for (int j = 1; j <= b.degree; ++j) {
        left[j] = x - knots[static_cast<size_t>(span + 1 - j)];
        right[j] = knots[static_cast<size_t>(span + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = row.values[static_cast<size_t>(r)] / denom;
            row.values[static_cast<size_t>(r)] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        row.values[static_cast<size_t>(j)] = saved;
    }
    return row;
}

}  // namespace

SparseMat bspline_basis_1d(const Eigen::VectorXd& x, const DimensionBasis& basis) {
    if (basis.degree < 0 || basis.count < basis.degree + 1 || !(basis.lo < basis.hi)) {
        throw ConfigError("invalid 1-D basis configuration");
    }
    if (basis.degree > 15) throw ConfigError("spline degree too large");
    const std::vector<double> knots = knot_vector(basis);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(x.size()) * static_cast<size_t>(basis.degree + 1));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const BasisRow row = evaluate_basis(x[i], basis, knots);
        for (int r = 0; r < row.count; ++r) {
            const double v = row.values[static_cast<size_t>(r)];
            if (v != 0.0) {
                trips.emplace_back(static_cast<int>(i), row.first_col + r, v);
            }
        }
    }
    SparseMat m(static_cast<int>(x.size()), basis.count);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

SparseMat tensor_design_points(const Eigen::VectorXd& s1, const Eigen::VectorXd& s2,
                               const Eigen::VectorXd& t, const TensorBasisSpec& spec) {
    spec.validate();
    if (s1.size() != s2.size() || s1.size() != t.size()) {
        throw ConfigError("coordinate vectors must have equal length");
    }
    const int n = static_cast<int>(s1.size());
    const int p1 = spec.dim[0].count, p2 = spec.dim[1].count;

    std::array<std::vector<double>, 3> knots = {
        knot_vector(spec.dim[0]), knot_vector(spec.dim[1]), knot_vector(spec.dim[2])};
    std::vector<Eigen::Triplet<double>> trips;
    const int per_row = (spec.dim[0].degree + 1) * (spec.dim[1].degree + 1) *
                        (spec.dim[2].degree + 1);
    trips.reserve(static_cast<size_t>(n) * static_cast<size_t>(per_row));

    for (int i = 0; i < n; ++i) {
        const BasisRow r1 = evaluate_basis(s1[i], spec.dim[0], knots[0]);
        const BasisRow r2 = evaluate_basis(s2[i], spec.dim[1], knots[1]);
        const BasisRow r3 = evaluate_basis(t[i], spec.dim[2], knots[2]);
        for (int c = 0; c < r3.count; ++c) {
            const double v3 = r3.values[static_cast<size_t>(c)];
            if (v3 == 0.0) continue;
            for (int b = 0; b < r2.count; ++b) {
                const double v23 = r2.values[static_cast<size_t>(b)] * v3;
                if (v23 == 0.0) continue;
                const int col_base = (r2.first_col + b) * p1 + (r3.first_col + c) * p1 * p2;
                for (int a = 0; a < r1.count; ++a) {
                    const double v = r1.values[static_cast<size_t>(a)] * v23;
                    if (v != 0.0) trips.emplace_back(i, col_base + r1.first_col + a, v);
                }
            }
        }
    }
    SparseMat m(n, spec.coef_count());
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

SparseMat tensor_design(const Dataset& ds, const TensorBasisSpec& spec) {
    return tensor_design_points(ds.s1_values(), ds.s2_values(), ds.t_values(), spec);
}

namespace {

// q-th order difference matrix, (p-q) x p, rows of alternating binomial
// coefficients; first-order rows are [-1, 1].
SparseMat difference_matrix_1d(int p, int q) {
    std::vector<double> coef{-1.0, 1.0};
    for (int step = 1; step < q; ++step) {
        std::vector<double> next(coef.size() + 1, 0.0);
        for (size_t i = 0; i < coef.size(); ++i) {
            next[i] -= coef[i];
            next[i + 1] += coef[i];
        }
        coef = std::move(next);
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < p - q; ++r) {
        for (int c = 0; c <= q; ++c) {
            trips.emplace_back(r, r + c, coef[static_cast<size_t>(c)]);
        }
    }
    SparseMat d(p - q, p);
    d.setFromTriplets(trips.begin(), trips.end());
    d.makeCompressed();
    return d;
}

SparseMat kron_sparse(const SparseMat& a, const SparseMat& b) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(a.nonZeros()) * static_cast<size_t>(b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseMat::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseMat::InnerIterator ib(b, kb); ib; ++ib) {
                    trips.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                                       static_cast<int>(ia.col() * b.cols() + ib.col()),
                                       ia.value() * ib.value());
                }
            }
        }
    }
    SparseMat m(static_cast<int>(a.rows() * b.rows()), static_cast<int>(a.cols() * b.cols()));
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

SparseMat identity_sparse(int n) {
    SparseMat i(n, n);
    i.setIdentity();
    return i;
}

}  // namespace

SparseMat difference_penalty(const TensorBasisSpec& spec) {
    spec.validate();
    const int p1 = spec.dim[0].count, p2 = spec.dim[1].count, p3 = spec.dim[2].count;
    const int q = spec.penalty_order;

    // dimension 1 varies fastest in the flattened coefficient order
    const SparseMat block1 = kron_sparse(identity_sparse(p2 * p3), difference_matrix_1d(p1, q));
    const SparseMat block2 = kron_sparse(identity_sparse(p3),
                                         kron_sparse(difference_matrix_1d(p2, q),
                                                     identity_sparse(p1)));
    const SparseMat block3 = kron_sparse(difference_matrix_1d(p3, q), identity_sparse(p1 * p2));

    const int p = spec.coef_count();
    SparseMat d(static_cast<int>(block1.rows() + block2.rows() + block3.rows()), p);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(block1.nonZeros() + block2.nonZeros() + block3.nonZeros()));
    int row_base = 0;
    for (const SparseMat* blk : {&block1, &block2, &block3}) {
        for (int k = 0; k < blk->outerSize(); ++k) {
            for (SparseMat::InnerIterator it(*blk, k); it; ++it) {
                trips.emplace_back(row_base + static_cast<int>(it.row()),
                                   static_cast<int>(it.col()), it.value());
            }
        }
        row_base += static_cast<int>(blk->rows());
    }
    d.setFromTriplets(trips.begin(), trips.end());
    d.makeCompressed();
    return d;
}

int penalty_null_space_dim(const TensorBasisSpec& spec) {
    spec.validate();
    // tensors polynomial of degree < q along each axis form the q^3-dimensional
    // product of the marginal null spaces
    const int q = spec.penalty_order;
    return q * q * q;
}

long penalty_nnz(const TensorBasisSpec& spec) {
    const int q = spec.penalty_order;
    long total = 0;
    for (int d = 0; d < 3; ++d) {
        long rows = spec.dim[static_cast<size_t>(d)].count - q;
        for (int e = 0; e < 3; ++e) {
            if (e != d) rows *= spec.dim[static_cast<size_t>(e)].count;
        }
        total += rows * (q + 1);
    }
    return total;
}

}  // namespace gwsmooth
