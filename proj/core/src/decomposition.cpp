#include "gwsmooth/decomposition.hpp"

#include <Eigen/SparseQR>
#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

namespace {

std::atomic<long> g_factorization_passes{0};

constexpr double kRankTol = 1e-10;

// Rows of R whose largest entry exceeds tol relative to the largest entry of
// the whole factor; candidate reduced penalty is R_nz * P^-1.
template <typename Permutation>
SparseMat nonzero_rows_applied(const Eigen::MatrixXd& r_dense, const Permutation& col_perm,
                               double tol) {
    const double scale = r_dense.cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < r_dense.rows(); ++i) {
        if (r_dense.row(i).cwiseAbs().maxCoeff() > tol * scale) keep.push_back(i);
    }
    Eigen::MatrixXd kept(static_cast<Eigen::Index>(keep.size()), r_dense.cols());
    for (size_t out = 0; out < keep.size(); ++out) {
        kept.row(static_cast<Eigen::Index>(out)) = r_dense.row(keep[out]);
    }
    Eigen::MatrixXd applied = kept * col_perm.inverse();
    SparseMat red = applied.sparseView(1.0, 1e-300);
    red.makeCompressed();
    return red;
}

// ||D v||^2 must be preserved by the reduction; random probes detect a
// broken row drop (e.g. an interior zero pivot with a nonzero tail).
bool quadratic_form_preserved(const SparseMat& d, const SparseMat& d_red) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int probe = 0; probe < 4; ++probe) {
        Eigen::VectorXd v(d.cols());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
        const double full = (d * v).squaredNorm();
        const double red = (d_red * v).squaredNorm();
        if (std::abs(full - red) > 1e-10 * std::max(1.0, full)) return false;
    }
    return true;
}

}  // namespace

SparseMat reduce_penalty(const SparseMat& d) {
    if (d.nonZeros() == 0) throw ConfigError("penalty matrix is identically zero");

    // Fast path: sparse QR. Zero pivots of the unpivoted factorization are
    // only droppable when their whole row vanishes, which the probe checks.
    {
        SparseMat dc = d;
        dc.makeCompressed();
        Eigen::SparseQR<SparseMat, Eigen::COLAMDOrdering<int>> qr;
        qr.compute(dc);
        if (qr.info() == Eigen::Success) {
            Eigen::MatrixXd r = Eigen::MatrixXd(qr.matrixR())
                                    .topRows(std::min(d.rows(), d.cols()));
            SparseMat red = nonzero_rows_applied(r, qr.colsPermutation(), kRankTol);
            if (red.rows() == d.rows()) {
                return d;  // already full row rank: keep exactly
            }
            // kept rows must agree with the rank estimate, otherwise the
            // reduction is not full row rank and the dense path decides
            if (red.rows() > 0 && red.rows() == static_cast<Eigen::Index>(qr.rank()) &&
                quadratic_form_preserved(d, red)) {
                return red;
            }
        }
    }

    // Rank-revealing fallback: column-pivoted dense QR pushes dependent
    // directions into trailing rows, which are then exactly droppable.
    Eigen::MatrixXd dense = Eigen::MatrixXd(d);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dense);
    qr.setThreshold(kRankTol);
    const int rank = static_cast<int>(qr.rank());
    if (rank == 0) throw ConfigError("penalty matrix has numerical rank zero");
    Eigen::MatrixXd r = qr.matrixR()
                            .topRows(rank)
                            .template triangularView<Eigen::Upper>();
    Eigen::MatrixXd reduced = r * qr.colsPermutation().inverse();
    if (rank == d.rows()) return d;
    SparseMat red = reduced.sparseView(1.0, 1e-300);
    red.makeCompressed();
    if (!quadratic_form_preserved(d, red)) {
        throw NumericalError("penalty reduction failed to preserve the quadratic form");
    }
    return red;
}

PenaltyReparam::PenaltyReparam(const SparseMat& d_red) {
    const int p = static_cast<int>(d_red.cols());
    const int r = static_cast<int>(d_red.rows());
    if (r == 0 || r > p) throw ConfigError("reduced penalty must have 1..p rows");

    // QR of D_red' (p x r, full column rank); r == p means an empty flat block
    SparseMat dt = SparseMat(d_red.transpose());
    dt.makeCompressed();
    Eigen::SparseQR<SparseMat, Eigen::COLAMDOrdering<int>> qr;
    qr.compute(dt);
    if (qr.info() != Eigen::Success) {
        throw NumericalError("sparse QR of the penalty transpose failed");
    }

    Eigen::MatrixXd q = qr.matrixQ() * Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd r1 = Eigen::MatrixXd(qr.matrixR()).topRows(r);  // r x r upper

    const double r_min = r1.diagonal().cwiseAbs().minCoeff();
    const double r_max = r1.diagonal().cwiseAbs().maxCoeff();
    if (!(r_min > kRankTol * r_max)) {
        throw NumericalError("reduced penalty is numerically rank-deficient; "
                             "run reduce_penalty first");
    }

    // alpha1 = R1' Q1' alpha (column permutation of the QR only reorders which
    // combinations form R1; the norm identity ||D alpha|| = ||alpha1|| holds
    // because D_red = P R1' Q1')
    to_penalized_ = r1.transpose() * q.leftCols(r).transpose();

    // t1 = Q1 (R1')^-1 so that alpha = t1 alpha1 + t2 alpha2
    t1_ = r1.triangularView<Eigen::Upper>()
              .solve(q.leftCols(r).transpose())
              .transpose();
    t2_ = q.rightCols(p - r);

    log_det_correction_ = 2.0 * r1.diagonal().cwiseAbs().array().log().sum();
}

DecomposedModel::DecomposedModel(const SparseMat& b, const PenaltyReparam& reparam,
                                 const Eigen::VectorXd& y) {
    build(b, reparam, y);
}

DecomposedModel::DecomposedModel(const SparseMat& b, const SparseMat& d_red,
                                 const Eigen::VectorXd& y) {
    build(b, PenaltyReparam(d_red), y);
}

void DecomposedModel::build(const SparseMat& b, const PenaltyReparam& reparam,
                            const Eigen::VectorXd& y) {
    n_ = static_cast<int>(b.rows());
    p_ = static_cast<int>(b.cols());
    r_ = reparam.rank();
    l_ = reparam.flat_dim();
    if (reparam.p() != p_) {
        throw ConfigError("penalty and design matrix column counts differ");
    }
    if (y.size() != n_) throw ConfigError("response length does not match design rows");
    if (n_ < l_) {
        throw NumericalError("fewer observations than flat-prior coefficients");
    }

    t1_ = reparam.t1();
    t2_ = reparam.t2();
    log_det_correction_ = reparam.log_det_correction();

    // rotated design blocks; the rotation makes them dense (in-fill)
    Eigen::MatrixXd b1 = b * t1_;  // n x r
    Eigen::MatrixXd b2 = b * t2_;  // n x l

    Eigen::MatrixXd ridge_block;  // B21, (n - l) x r
    if (l_ > 0) {
        // invertibility of B12 decides whether the data identify the flat block
        Eigen::JacobiSVD<Eigen::MatrixXd> probe(b2);
        const double s_max = probe.singularValues()[0];
        const double s_min = probe.singularValues()[probe.singularValues().size() - 1];
        if (!(s_min > 1e-10 * s_max)) {
            throw NumericalError(
                "design does not identify the penalty null space (B12 nearly singular); "
                "the unpenalized component cannot be estimated from these observations");
        }

        obs_rotation_ = Eigen::HouseholderQR<Eigen::MatrixXd>(b2);
        Eigen::MatrixXd rotated_b1 = obs_rotation_.householderQ().adjoint() * b1;
        Eigen::VectorXd rotated_y = obs_rotation_.householderQ().adjoint() * y;

        b11_ = rotated_b1.topRows(l_);
        ridge_block = rotated_b1.bottomRows(n_ - l_);
        y1_ = rotated_y.head(l_);
        y2_ = rotated_y.tail(n_ - l_);

        b12_ = obs_rotation_.matrixQR()
                   .topRows(l_)
                   .template triangularView<Eigen::Upper>();
        log_det_b12_ = 2.0 * b12_.diagonal().cwiseAbs().array().log().sum();
    } else {
        b11_.resize(0, r_);
        b12_.resize(0, 0);
        y1_.resize(0);
        y2_ = y;
        ridge_block = std::move(b1);
        log_det_b12_ = 0.0;
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(ridge_block,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    sigma_ = svd.singularValues();
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    z_ = u_.transpose() * y2_;
    rho2_ = std::max(0.0, y2_.squaredNorm() - z_.squaredNorm());

    t1v_ = t1_ * v_;
    b11v_ = b11_ * v_;

    g_factorization_passes.fetch_add(1, std::memory_order_relaxed);
}

Eigen::VectorXd DecomposedModel::flat_coefficients(const Eigen::VectorXd& w) const {
    // alpha2 = B12^-1 (y1 - B11 alpha1), with B11 alpha1 = (B11 V) w; B12 is
    // the upper-triangular factor of the observation rotation
    return b12_.triangularView<Eigen::Upper>().solve(y1_ - b11v_ * w);
}

LambdaFit DecomposedModel::solve_for_lambda(double lambda) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite and >= 0");
    }
    const int k = singular_count();
    if (lambda == 0.0) {
        const bool deficient = k < r_ || (k > 0 && !(sigma_[k - 1] > kRankTol * sigma_[0]));
        if (deficient) {
            throw NumericalError(
                "lambda = 0 with an underdetermined ridge block; a positive penalty "
                "is required when rank(D) exceeds the data-side rank");
        }
    }

    LambdaFit fit;
    fit.lambda = lambda;

    Eigen::ArrayXd s = sigma_.array();
    Eigen::ArrayXd denom = s.square() + lambda;
    Eigen::ArrayXd w = s * z_.array() / denom;

    Eigen::VectorXd wv = w.matrix();
    fit.alpha = t1v_ * wv;
    if (l_ > 0) {
        fit.alpha += t2_ * flat_coefficients(wv);
    }

    fit.rss = rho2_ + (z_.array().square() * (lambda / denom).square()).sum();
    fit.quad_form = rho2_ + (z_.array().square() * lambda / denom).sum();
    fit.edf = l_ + (s.square() / denom).sum();

    double log_det = denom.log().sum();
    if (r_ > k) log_det += (r_ - k) * std::log(lambda);
    fit.log_det = log_det + log_det_b12_ + log_det_correction_;
    return fit;
}

DecomposedModel::CompressedFit DecomposedModel::solve_compressed(double lambda) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite and >= 0");
    }
    CompressedFit fit;
    fit.lambda = lambda;
    Eigen::ArrayXd denom = sigma_.array().square() + lambda;
    fit.w = (sigma_.array() * z_.array() / denom).matrix();
    fit.alpha2 = l_ > 0 ? flat_coefficients(fit.w) : Eigen::VectorXd();
    return fit;
}

Eigen::VectorXd DecomposedModel::shrinkage_factors(double lambda) const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    Eigen::ArrayXd s2 = sigma_.array().square();
    return (s2 / (s2 + lambda)).matrix();
}

double DecomposedModel::quad_inverse_form(double lambda, const Eigen::VectorXd& v) const {
    if (v.size() != p_) throw ConfigError("vector length does not match coefficient count");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    const int k = singular_count();
    if (lambda == 0.0 && k < r_) {
        throw NumericalError("lambda = 0 with an underdetermined ridge block");
    }

    // c = M^-T v splits into the penalized and flat components
    Eigen::VectorXd c1 = t1_.transpose() * v;  // r
    Eigen::VectorXd c2 = t2_.transpose() * v;  // l

    // Schur complement of the rotated normal equations is exactly
    // B21'B21 + lambda I; B12 being invertible cancels the B11 terms.
    Eigen::VectorXd g = c1;
    if (l_ > 0) {
        g -= b11_.transpose() *
             b12_.transpose().triangularView<Eigen::Lower>().solve(c2);
    }
    Eigen::VectorXd vt_g = v_.transpose() * g;  // k
    Eigen::ArrayXd denom = sigma_.array().square() + lambda;
    Eigen::VectorXd x1 = v_ * (vt_g.array() / denom).matrix().eval();
    if (r_ > k) {
        // directions outside the data-side span: (g - V V'g)/lambda
        x1 += (g - v_ * vt_g) / lambda;
    }

    double result = c1.dot(x1);
    if (l_ > 0) {
        Eigen::VectorXd rhs =
            b12_.transpose().triangularView<Eigen::Lower>().solve(c2) - b11_ * x1;
        Eigen::VectorXd x2 = b12_.triangularView<Eigen::Upper>().solve(rhs);
        result += c2.dot(x2);
    }
    return result;
}

Eigen::VectorXd DecomposedModel::fitted_from_rotated(double lambda) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite and >= 0");
    }
    Eigen::ArrayXd denom = sigma_.array().square() + lambda;
    Eigen::VectorXd w = (sigma_.array() * z_.array() / denom).matrix();

    Eigen::VectorXd rotated(n_);
    if (l_ > 0) {
        rotated.head(l_) = b11v_ * w + b12_ * flat_coefficients(w);
        rotated.tail(n_ - l_) = u_ * (sigma_.array() * w.array()).matrix();
        return obs_rotation_.householderQ() * rotated;
    }
    return u_ * (sigma_.array() * w.array()).matrix();
}

long factorization_passes() { return g_factorization_passes.load(std::memory_order_relaxed); }

void reset_factorization_passes() { g_factorization_passes.store(0, std::memory_order_relaxed); }

}  // namespace gwsmooth
