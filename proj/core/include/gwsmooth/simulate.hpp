#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>

#include "gwsmooth/dataset.hpp"
#include "gwsmooth/predict.hpp"
#include "gwsmooth/selection.hpp"

namespace gwsmooth {

enum class Boundary { zero_value, zero_flux };

/// Advection-diffusion forcing: dy/dt = Dc * laplacian(y) + psi1 dy/ds1
/// + psi2 dy/ds2 on a rectangle. Velocity fields are sampled on the solver
/// grid nodes.
struct FlowModel {
    double diffusion = 0.0;
    Boundary bc = Boundary::zero_flux;
    double s1_lo = 0.0, s1_hi = 1.0;
    double s2_lo = 0.0, s2_hi = 1.0;
    Eigen::MatrixXd psi1, psi2;  ///< nx x ny, node (i,j) at (s1_i, s2_j)
};

/// Dense space-time concentration field on a regular grid with a trilinear
/// interpolator. Values are clamped at zero.
class GroundTruth {
  public:
    GroundTruth(int n1, int n2, int nt, double s1_lo, double s1_hi, double s2_lo, double s2_hi,
                double t_end);

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int nt() const { return nt_; }
    double s1_lo() const { return s1_lo_; }
    double s1_hi() const { return s1_hi_; }
    double s2_lo() const { return s2_lo_; }
    double s2_hi() const { return s2_hi_; }
    double t_end() const { return t_end_; }

    double& at(int i, int j, int k) {
        return values_[static_cast<size_t>(i) + static_cast<size_t>(n1_) * (j + static_cast<size_t>(n2_) * k)];
    }
    double at(int i, int j, int k) const {
        return values_[static_cast<size_t>(i) + static_cast<size_t>(n1_) * (j + static_cast<size_t>(n2_) * k)];
    }

    double interpolate(double s1, double s2, double t) const;

    void save(const std::filesystem::path& path) const;
    static GroundTruth load(const std::filesystem::path& path);

  private:
    int n1_, n2_, nt_;
    double s1_lo_, s1_hi_, s2_lo_, s2_hi_, t_end_;
    std::vector<double> values_;
};

/// Explicit finite-difference solution (central diffusion, first-order
/// upwind advection, CFL-bounded forward Euler), stored at `output_slices`
/// equally spaced times including t = 0 and t = t_end.
GroundTruth solve_pde(const FlowModel& flow, const Eigen::MatrixXd& initial, double t_end = 1.0,
                      int output_slices = 100);

/// Well design + sampling schedule + noise configuration for one synthetic
/// study scenario.
struct ScenarioSpec {
    int id = 1;                     ///< 1: 29 fixed wells / 1402 obs; 2: 280 random wells /
                                    ///< 1402 obs; 3: 29 fixed wells / 100 obs
    std::uint64_t seed = 0;
    double snr = 10.0;              ///< log-scale signal-to-noise ratio (inf = noiseless)
    double within_well_corr = 0.05;
    Transform transform = Transform::log1p;

    int observation_count() const { return id == 3 ? 100 : 1402; }
    int well_count() const { return id == 2 ? 280 : 29; }
    void validate() const;
};

/// The committed 29-well layout used by scenarios 1 and 3 (clustered, with a
/// sparse corridor), in truth-domain units.
const std::array<std::pair<double, double>, 29>& scenario1_wells();

/// Samples the truth at scheduled (well, time) slots and applies
/// multiplicative log-scale noise with an equicorrelated within-well
/// component. Deterministic per seed.
Dataset build_scenario(const GroundTruth& truth, const ScenarioSpec& spec);

/// Synthetic hydraulic-head surface (two planar trends plus a Gaussian bump)
/// with velocities psi = -kappa * grad(head), scaled so the plume crosses a
/// large part of the domain over t in [0,1], plus a Gaussian initial blob.
std::pair<FlowModel, Eigen::MatrixXd> default_flow_and_initial(std::uint64_t seed, int nx = 100,
                                                               int ny = 100);

/// Riemann-sum integrated squared error between the fitted surface and the
/// transformed truth over grid cells inside the spatial hull and the sampled
/// time window. `refine` multiplies the evaluation resolution.
double integrated_squared_error(const FitResult& fit, const TensorBasisSpec& spec,
                                const GroundTruth& truth, const HullRegion& hull,
                                int refine = 1);

/// Largest absolute deviation from the transformed truth over the same cells
/// (the ballooning diagnostic).
double max_abs_error(const FitResult& fit, const TensorBasisSpec& spec,
                     const GroundTruth& truth, const HullRegion& hull);

/// Both error summaries from a single evaluation pass.
struct SurfaceErrors {
    double ise = 0.0;
    double max_abs = 0.0;
};
SurfaceErrors surface_errors(const FitResult& fit, const TensorBasisSpec& spec,
                             const GroundTruth& truth, const HullRegion& hull, int refine = 1);

}  // namespace gwsmooth
