#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gwsmooth/splines.hpp"

namespace gwsmooth {

/// Per-lambda outputs of a decomposed model. `quad_form` is the posterior
/// quadratic form y'(I - B(B'B + lambda D'D)^-1 B')y, which differs from the
/// residual sum of squares by the penalty term lambda*||D alpha||^2.
struct LambdaFit {
    double lambda = 0.0;
    Eigen::VectorXd alpha;   ///< coefficients in the original parametrization
    double rss = 0.0;        ///< ||y - B alpha||^2
    double quad_form = 0.0;  ///< y'(I - S(lambda))y
    double log_det = 0.0;    ///< log det(B'B + lambda D'D)
    double edf = 0.0;        ///< trace of the hat matrix
};

/// Replaces a row-rank-deficient penalty matrix by an equivalent full
/// row-rank matrix: ||D_red v||^2 == ||D v||^2 for all v.
SparseMat reduce_penalty(const SparseMat& d);

/// Penalty-only part of the factorization: the coefficient-space rotation
/// splitting alpha into a penalized block (rank r) and a flat block (size
/// p - r). Depends only on D, so it is shared across CV folds and replicate
/// fits with a common basis spec.
class PenaltyReparam {
  public:
    /// `d_red` must have full row rank (see reduce_penalty).
    explicit PenaltyReparam(const SparseMat& d_red);

    int p() const { return static_cast<int>(t1_.rows()); }
    int rank() const { return static_cast<int>(t1_.cols()); }
    int flat_dim() const { return p() - rank(); }

    /// alpha = t1 * alpha1 + t2 * alpha2
    const Eigen::MatrixXd& t1() const { return t1_; }
    const Eigen::MatrixXd& t2() const { return t2_; }
    /// map alpha -> alpha1 with ||D alpha|| = ||alpha1||
    const Eigen::MatrixXd& to_penalized() const { return to_penalized_; }
    /// log |det M|^2 for the full reparametrization map M: alpha -> alpha~;
    /// restores log det(B'B + lambda D'D) from the rotated-block determinant
    double log_det_correction() const { return log_det_correction_; }

  private:
    Eigen::MatrixXd t1_, t2_, to_penalized_;
    double log_det_correction_ = 0.0;
};

/// Lambda-independent factorization of a penalized least-squares problem.
/// Built once per dataset/basis; every per-lambda quantity (coefficients,
/// residual energy, determinant, EDF) is then O(p) to evaluate.
class DecomposedModel {
  public:
    DecomposedModel(const SparseMat& b, const PenaltyReparam& reparam, const Eigen::VectorXd& y);
    DecomposedModel(const SparseMat& b, const SparseMat& d_red, const Eigen::VectorXd& y);

    int n() const { return n_; }
    int p() const { return p_; }
    /// size of the flat-prior block (penalty null-space dimension)
    int flat_dim() const { return l_; }
    /// row rank of the reduced penalty = rank(D'D)
    int penalty_rank() const { return r_; }
    /// number of singular values of the ridge block, min(n - flat_dim, rank)
    int singular_count() const { return static_cast<int>(sigma_.size()); }
    const Eigen::VectorXd& singular_values() const { return sigma_; }
    /// energy of y orthogonal to the ridge block's column space
    double residual_energy() const { return rho2_; }

    /// Solve the penalized problem at one lambda value. Pure and O(p) given
    /// the stored factorization; safe to call concurrently.
    LambdaFit solve_for_lambda(double lambda) const;

    /// Compressed per-lambda solution: alpha = t1v() * w + t2() * alpha2.
    /// Lets lambda sweeps that only need fitted values at a fixed set of
    /// points skip the full coefficient reconstruction.
    struct CompressedFit {
        double lambda = 0.0;
        Eigen::VectorXd w;       ///< ridge coordinates along the singular directions
        Eigen::VectorXd alpha2;  ///< flat-block coefficients
    };
    CompressedFit solve_compressed(double lambda) const;
    const Eigen::MatrixXd& t1v() const { return t1v_; }

    /// Per-singular-value hat-matrix shares sigma_i^2/(sigma_i^2 + lambda);
    /// their sum plus flat_dim() equals the EDF.
    Eigen::VectorXd shrinkage_factors(double lambda) const;

    /// v'(B'B + lambda D'D)^-1 v for a coefficient-space vector v, via block
    /// elimination of the rotated system. Used for posterior variances.
    double quad_inverse_form(double lambda, const Eigen::VectorXd& v) const;

    /// Fitted values reconstructed through the rotated blocks (applies the
    /// stored observation-space rotation); equals B * alpha up to roundoff.
    Eigen::VectorXd fitted_from_rotated(double lambda) const;

    // rotated blocks, exposed for validation and diagnostics
    const Eigen::MatrixXd& b11() const { return b11_; }
    const Eigen::MatrixXd& b12() const { return b12_; }
    const Eigen::MatrixXd& ridge_u() const { return u_; }
    const Eigen::MatrixXd& ridge_v() const { return v_; }
    const Eigen::VectorXd& y1() const { return y1_; }
    const Eigen::VectorXd& uty2() const { return z_; }
    const Eigen::MatrixXd& t1() const { return t1_; }
    const Eigen::MatrixXd& t2() const { return t2_; }
    double log_det_b12() const { return log_det_b12_; }

  private:
    void build(const SparseMat& b, const PenaltyReparam& reparam, const Eigen::VectorXd& y);
    Eigen::VectorXd flat_coefficients(const Eigen::VectorXd& w) const;

    int n_ = 0, p_ = 0, r_ = 0, l_ = 0;
    Eigen::VectorXd sigma_;  // singular values of the ridge block, nonincreasing
    Eigen::VectorXd z_;      // U' y2
    Eigen::VectorXd y1_;
    Eigen::VectorXd y2_;
    double rho2_ = 0.0;
    double log_det_b12_ = 0.0;      // log det(B12' B12)
    double log_det_correction_ = 0.0;
    Eigen::MatrixXd t1_, t2_;       // back-transform, p x r and p x l
    Eigen::MatrixXd b11_;           // l x r
    Eigen::MatrixXd b12_;           // l x l, invertible upper triangular
    Eigen::MatrixXd u_, v_;         // thin SVD factors of the ridge block
    Eigen::MatrixXd t1v_;           // t1 * V, p x k (hot-path cache)
    Eigen::MatrixXd b11v_;          // b11 * V, l x k
    Eigen::HouseholderQR<Eigen::MatrixXd> obs_rotation_;  // QR of B~2 (n x l)
};

/// Number of decompose-grade factorization passes performed so far (one per
/// DecomposedModel built). solve_for_lambda never increments it.
long factorization_passes();
void reset_factorization_passes();

}  // namespace gwsmooth
