#include "gwsmooth/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

}  // namespace

GroundTruth::GroundTruth(int n1, int n2, int nt, double s1_lo, double s1_hi, double s2_lo,
                         double s2_hi, double t_end)
    : n1_(n1), n2_(n2), nt_(nt), s1_lo_(s1_lo), s1_hi_(s1_hi), s2_lo_(s2_lo), s2_hi_(s2_hi),
      t_end_(t_end) {
    if (n1 < 2 || n2 < 2 || nt < 2) throw ConfigError("truth grid needs >= 2 nodes per axis");
    if (!(s1_lo < s1_hi) || !(s2_lo < s2_hi) || !(t_end > 0.0)) {
        throw ConfigError("invalid truth domain");
    }
    values_.assign(static_cast<size_t>(n1) * n2 * nt, 0.0);
}

double GroundTruth::interpolate(double s1, double s2, double t) const {
    auto locate = [](double x, double lo, double hi, int n, int& i, double& frac) {
        const double u = (x - lo) / (hi - lo) * (n - 1);
        i = std::clamp(static_cast<int>(std::floor(u)), 0, n - 2);
        frac = std::clamp(u - i, 0.0, 1.0);
    };
    int i, j, k;
    double fi, fj, fk;
    locate(s1, s1_lo_, s1_hi_, n1_, i, fi);
    locate(s2, s2_lo_, s2_hi_, n2_, j, fj);
    locate(t, 0.0, t_end_, nt_, k, fk);

    double c = 0.0;
    for (int dk = 0; dk < 2; ++dk) {
        const double wk = dk ? fk : 1.0 - fk;
        for (int dj = 0; dj < 2; ++dj) {
            const double wj = dj ? fj : 1.0 - fj;
            for (int di = 0; di < 2; ++di) {
                const double wi = di ? fi : 1.0 - fi;
                c += wi * wj * wk * at(i + di, j + dj, k + dk);
            }
        }
    }
    return c;
}

void GroundTruth::save(const std::filesystem::path& path) const {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out.write("GWTRUTH1", 8);
        const std::int32_t dims[3] = {n1_, n2_, nt_};
        out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        const double domain[5] = {s1_lo_, s1_hi_, s2_lo_, s2_hi_, t_end_};
        out.write(reinterpret_cast<const char*>(domain), sizeof(domain));
        out.write(reinterpret_cast<const char*>(values_.data()),
                  static_cast<std::streamsize>(values_.size() * sizeof(double)));
    }
    std::filesystem::rename(tmp, path);
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open truth file: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "GWTRUTH1", 8) != 0) {
        throw DataError("not a truth file (bad magic): " + path.string());
    }
    std::int32_t dims[3];
    double domain[5];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    in.read(reinterpret_cast<char*>(domain), sizeof(domain));
    if (!in) throw DataError("truncated truth file header: " + path.string());
    GroundTruth truth(dims[0], dims[1], dims[2], domain[0], domain[1], domain[2], domain[3],
                      domain[4]);
    in.read(reinterpret_cast<char*>(truth.values_.data()),
            static_cast<std::streamsize>(truth.values_.size() * sizeof(double)));
    if (!in) throw DataError("truncated truth file data: " + path.string());
    return truth;
}

GroundTruth solve_pde(const FlowModel& flow, const Eigen::MatrixXd& initial, double t_end,
                      int output_slices) {
    const int nx = static_cast<int>(initial.rows());
    const int ny = static_cast<int>(initial.cols());
    if (flow.psi1.rows() != nx || flow.psi1.cols() != ny || flow.psi2.rows() != nx ||
        flow.psi2.cols() != ny) {
        throw ConfigError("velocity fields must match the initial grid");
    }
    if (!(flow.diffusion > 0.0)) throw ConfigError("diffusion coefficient must be > 0");
    if (!flow.psi1.allFinite() || !flow.psi2.allFinite() || !initial.allFinite()) {
        throw ConfigError("flow model fields must be finite");
    }
    if (initial.minCoeff() < 0.0) throw ConfigError("initial concentrations must be >= 0");
    if (output_slices < 2) throw ConfigError("need at least 2 output slices");

    const double dx = (flow.s1_hi - flow.s1_lo) / (nx - 1);
    const double dy = (flow.s2_hi - flow.s2_lo) / (ny - 1);
    const double vmax1 = flow.psi1.cwiseAbs().maxCoeff();
    const double vmax2 = flow.psi2.cwiseAbs().maxCoeff();

    // CFL bound for explicit stepping, safety factor 0.5
    const double rate =
        2.0 * flow.diffusion * (1.0 / (dx * dx) + 1.0 / (dy * dy)) + vmax1 / dx + vmax2 / dy;
    const double dt_max = 0.5 / rate;

    GroundTruth truth(nx, ny, output_slices, flow.s1_lo, flow.s1_hi, flow.s2_lo, flow.s2_hi,
                      t_end);

    const double blow_up = 1e6 * std::max(1e-300, initial.maxCoeff());
    Eigen::MatrixXd y = initial;
    Eigen::MatrixXd ynext(nx, ny);

    auto store_slice = [&](int slice) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                truth.at(i, j, slice) = std::max(0.0, y(i, j));
            }
        }
    };
    store_slice(0);

    const double slice_dt = t_end / (output_slices - 1);
    long step_count = 0;
    for (int slice = 1; slice < output_slices; ++slice) {
        const int steps = std::max(1, static_cast<int>(std::ceil(slice_dt / dt_max)));
        const double dt = slice_dt / steps;
        for (int s = 0; s < steps; ++s, ++step_count) {
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i) {
                    const double c = y(i, j);
                    // zero-flux boundaries reflect, zero-value boundaries read 0
                    auto val = [&](int ii, int jj) -> double {
                        if (ii >= 0 && ii < nx && jj >= 0 && jj < ny) return y(ii, jj);
                        if (flow.bc == Boundary::zero_value) return 0.0;
                        ii = std::clamp(ii, 0, nx - 1);
                        jj = std::clamp(jj, 0, ny - 1);
                        return y(ii, jj);
                    };
                    const double lap = (val(i + 1, j) - 2.0 * c + val(i - 1, j)) / (dx * dx) +
                                       (val(i, j + 1) - 2.0 * c + val(i, j - 1)) / (dy * dy);
                    // upwind in the sign of the coefficient of dy/ds
                    const double a1 = flow.psi1(i, j);
                    const double d1 = a1 > 0.0 ? (val(i + 1, j) - c) / dx
                                               : (c - val(i - 1, j)) / dx;
                    const double a2 = flow.psi2(i, j);
                    const double d2 = a2 > 0.0 ? (val(i, j + 1) - c) / dy
                                               : (c - val(i, j - 1)) / dy;
                    ynext(i, j) = c + dt * (flow.diffusion * lap + a1 * d1 + a2 * d2);
                }
            }
            if (flow.bc == Boundary::zero_value) {
                ynext.row(0).setZero();
                ynext.row(nx - 1).setZero();
                ynext.col(0).setZero();
                ynext.col(ny - 1).setZero();
            }
            y.swap(ynext);
            if (y.cwiseAbs().maxCoeff() > blow_up) {
                throw NumericalError("PDE integration became unstable at step " +
                                     std::to_string(step_count));
            }
        }
        store_slice(slice);
    }
    return truth;
}

void ScenarioSpec::validate() const {
    if (id < 1 || id > 3) throw ConfigError("scenario id must be 1, 2 or 3");
    if (!(snr > 0.0)) throw ConfigError("signal-to-noise ratio must be > 0");
    if (within_well_corr < 0.0 || within_well_corr > 1.0) {
        throw ConfigError("within-well correlation must be in [0, 1]");
    }
}

namespace {

struct Slot {
    int well = 0;
    double t = 0.0;
};

std::string well_name(const char* prefix, int index, int width) {
    std::string num = std::to_string(index + 1);
    while (static_cast<int>(num.size()) < width) num.insert(num.begin(), '0');
    return std::string(prefix) + num;
}

// per-well counts summing to `total`, extras dealt to a seeded shuffle
std::vector<int> deal_counts(int wells, int total, std::mt19937_64& rng) {
    std::vector<int> counts(static_cast<size_t>(wells), total / wells);
    std::vector<int> order(static_cast<size_t>(wells));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int e = 0; e < total % wells; ++e) counts[static_cast<size_t>(order[e])] += 1;
    return counts;
}

// regular per-well cadence with jitter, all times strictly inside [0, t_end]
std::vector<Slot> schedule_slots(int wells, int total, double t_end, std::mt19937_64& rng) {
    std::vector<int> counts = deal_counts(wells, total, rng);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::vector<Slot> slots;
    slots.reserve(static_cast<size_t>(total));
    for (int w = 0; w < wells; ++w) {
        const int m = counts[static_cast<size_t>(w)];
        for (int i = 0; i < m; ++i) {
            double u = (i + 0.5 + jitter(rng)) / m;
            u = std::clamp(u, 0.0, 1.0);
            slots.push_back(Slot{w, u * t_end});
        }
    }
    return slots;
}

}  // namespace

Dataset build_scenario(const GroundTruth& truth, const ScenarioSpec& spec) {
    spec.validate();

    // well positions, mapped into the truth domain
    std::vector<std::pair<double, double>> wells;
    const char* prefix = "W";
    int name_width = 2;
    if (spec.id == 2) {
        prefix = "R";
        name_width = 3;
        std::mt19937_64 rng = stream_rng(spec.seed, 2);
        std::uniform_real_distribution<double> ux(0.03, 0.97);
        std::uniform_real_distribution<double> uy(0.03, 0.97);
        for (int w = 0; w < spec.well_count(); ++w) {
            wells.emplace_back(ux(rng), uy(rng));
        }
    } else {
        for (const auto& [x, y] : scenario1_wells()) wells.emplace_back(x, y);
    }
    auto to_domain = [&](const std::pair<double, double>& unit) {
        return std::pair<double, double>{
            truth.s1_lo() + unit.first * (truth.s1_hi() - truth.s1_lo()),
            truth.s2_lo() + unit.second * (truth.s2_hi() - truth.s2_lo())};
    };

    // scenarios 1 and 3 share the 1402-slot schedule for a given seed;
    // scenario 3 keeps a stratified subsample (at least one slot per well)
    std::mt19937_64 sched_rng = stream_rng(spec.seed, 1);
    std::vector<Slot> slots =
        schedule_slots(static_cast<int>(wells.size()), 1402, truth.t_end(), sched_rng);
    if (spec.id == 3) {
        std::mt19937_64 sub_rng = stream_rng(spec.seed, 4);
        std::vector<std::vector<int>> by_well(wells.size());
        for (size_t s = 0; s < slots.size(); ++s) {
            by_well[static_cast<size_t>(slots[s].well)].push_back(static_cast<int>(s));
        }
        std::vector<char> chosen(slots.size(), 0);
        for (auto& slot_ids : by_well) {
            std::uniform_int_distribution<size_t> pick(0, slot_ids.size() - 1);
            chosen[static_cast<size_t>(slot_ids[pick(sub_rng)])] = 1;
        }
        std::vector<int> rest;
        for (size_t s = 0; s < slots.size(); ++s) {
            if (!chosen[s]) rest.push_back(static_cast<int>(s));
        }
        std::shuffle(rest.begin(), rest.end(), sub_rng);
        const int extra = spec.observation_count() - static_cast<int>(wells.size());
        for (int e = 0; e < extra; ++e) chosen[static_cast<size_t>(rest[e])] = 1;
        std::vector<Slot> kept;
        for (size_t s = 0; s < slots.size(); ++s) {
            if (chosen[s]) kept.push_back(slots[s]);
        }
        slots = std::move(kept);
    }

    // true values and the per-dataset noise scale (empirical in-sample SNR)
    std::vector<double> truth_log(slots.size());
    double mean = 0.0;
    for (size_t s = 0; s < slots.size(); ++s) {
        const auto [x, y] = to_domain(wells[static_cast<size_t>(slots[s].well)]);
        truth_log[s] = std::log1p(std::max(0.0, truth.interpolate(x, y, slots[s].t)));
        mean += truth_log[s];
    }
    mean /= static_cast<double>(slots.size());
    double var = 0.0;
    for (double g : truth_log) var += (g - mean) * (g - mean);
    var /= static_cast<double>(slots.size() - 1);
    const double noise_sd = std::isinf(spec.snr) ? 0.0 : std::sqrt(var) / spec.snr;

    // equicorrelated log-scale noise: shared per-well effect + individual term
    std::mt19937_64 noise_rng = stream_rng(spec.seed, 3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> well_effect(wells.size());
    for (double& u : well_effect) u = gauss(noise_rng);
    const double shared_scale = std::sqrt(spec.within_well_corr);
    const double indiv_scale = std::sqrt(1.0 - spec.within_well_corr);

    std::vector<Observation> obs;
    obs.reserve(slots.size());
    for (size_t s = 0; s < slots.size(); ++s) {
        const Slot& slot = slots[s];
        const auto [x, y] = to_domain(wells[static_cast<size_t>(slot.well)]);
        const double noise = noise_sd * (shared_scale * well_effect[static_cast<size_t>(slot.well)] +
                                         indiv_scale * gauss(noise_rng));
        Observation o;
        o.well_id = well_name(prefix, slot.well, name_width);
        o.s1 = x;
        o.s2 = y;
        o.t = slot.t;
        o.value = std::max(0.0, std::expm1(truth_log[s] + noise));
        obs.push_back(std::move(o));
    }
    return Dataset::from_observations(std::move(obs), spec.transform);
}

std::pair<FlowModel, Eigen::MatrixXd> default_flow_and_initial(std::uint64_t seed, int nx,
                                                               int ny) {
    std::mt19937_64 rng = stream_rng(seed, 7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    // head surface: eastward + slight northward trend plus one bump; the
    // plume drifts with velocity kappa * grad(head) toward rising head
    const double gx = 1.0 * (1.0 + 0.05 * unit(rng));
    const double gy = 0.15 * (1.0 + 0.10 * unit(rng));
    const double bump_amp = 0.35 * (1.0 + 0.10 * unit(rng));
    const double bump_x = 0.65 + 0.02 * unit(rng);
    const double bump_y = 0.30 + 0.02 * unit(rng);
    const double bump_w = 0.22;
    const double kappa = 0.62;

    FlowModel flow;
    flow.diffusion = 0.005;
    flow.bc = Boundary::zero_flux;
    flow.psi1.resize(nx, ny);
    flow.psi2.resize(nx, ny);

    auto grad_head = [&](double x, double y) {
        const double ex = std::exp(-((x - bump_x) * (x - bump_x) + (y - bump_y) * (y - bump_y)) /
                                   (2.0 * bump_w * bump_w));
        const double hx = gx - bump_amp * (x - bump_x) / (bump_w * bump_w) * ex;
        const double hy = gy - bump_amp * (y - bump_y) / (bump_w * bump_w) * ex;
        return std::pair<double, double>{hx, hy};
    };

    for (int j = 0; j < ny; ++j) {
        const double y = static_cast<double>(j) / (ny - 1);
        for (int i = 0; i < nx; ++i) {
            const double x = static_cast<double>(i) / (nx - 1);
            const auto [hx, hy] = grad_head(x, y);
            flow.psi1(i, j) = -kappa * hx;
            flow.psi2(i, j) = -kappa * hy;
        }
    }

    // initial blob inside the west well cluster
    const double cx = 0.18, cy = 0.50, width = 0.06, amplitude = 150.0;
    Eigen::MatrixXd initial(nx, ny);
    for (int j = 0; j < ny; ++j) {
        const double y = static_cast<double>(j) / (ny - 1);
        for (int i = 0; i < nx; ++i) {
            const double x = static_cast<double>(i) / (nx - 1);
            initial(i, j) = amplitude * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                                                 (2.0 * width * width));
        }
    }
    return {std::move(flow), std::move(initial)};
}

namespace {

// shared quadrature walk over in-hull, in-window cell centers
template <typename Accumulate>
void for_hull_cells(const FitResult& fit, const TensorBasisSpec& spec, const GroundTruth& truth,
                    const HullRegion& hull, int refine, Accumulate&& acc) {
    if (refine < 1) throw ConfigError("refine must be >= 1");
    const int n1 = truth.n1() * refine;
    const int n2 = truth.n2() * refine;
    const int nt = truth.nt() * refine;
    const double d1 = (truth.s1_hi() - truth.s1_lo()) / n1;
    const double d2 = (truth.s2_hi() - truth.s2_lo()) / n2;
    if (!(hull.t_max > hull.t_min)) throw DataError("empty time window for the error integral");
    const double dt = (hull.t_max - hull.t_min) / nt;
    const double cell_volume = d1 * d2 * dt;

    // cell centers, restricted to the knot-supported rectangle; in-hull
    // centers always lie inside it because the hull vertices are data points
    std::vector<double> c1, c2, ct;
    std::vector<int> i1_of, i2_of;
    for (int i = 0; i < n1; ++i) {
        const double x = truth.s1_lo() + (i + 0.5) * d1;
        if (x >= spec.dim[0].lo && x <= spec.dim[0].hi) {
            c1.push_back(x);
            i1_of.push_back(i);
        }
    }
    for (int j = 0; j < n2; ++j) {
        const double y = truth.s2_lo() + (j + 0.5) * d2;
        if (y >= spec.dim[1].lo && y <= spec.dim[1].hi) {
            c2.push_back(y);
            i2_of.push_back(j);
        }
    }
    for (int k = 0; k < nt; ++k) {
        const double t = hull.t_min + (k + 0.5) * dt;
        if (t >= spec.dim[2].lo && t <= spec.dim[2].hi) ct.push_back(t);
    }
    if (c1.empty() || c2.empty() || ct.empty()) {
        throw DataError("hull does not intersect the prediction domain");
    }

    Eigen::Map<const Eigen::VectorXd> ax1(c1.data(), static_cast<Eigen::Index>(c1.size()));
    Eigen::Map<const Eigen::VectorXd> ax2(c2.data(), static_cast<Eigen::Index>(c2.size()));
    Eigen::Map<const Eigen::VectorXd> axt(ct.data(), static_cast<Eigen::Index>(ct.size()));
    const PredictionGrid grid =
        predict_grid(fit, spec, ax1, ax2, axt, &hull.polygon, /*back_transform=*/false);

    bool any = false;
    for (int i2 = 0; i2 < static_cast<int>(c2.size()); ++i2) {
        for (int i1 = 0; i1 < static_cast<int>(c1.size()); ++i1) {
            if (!grid.in_hull[static_cast<size_t>(i1) + c1.size() * static_cast<size_t>(i2)]) {
                continue;
            }
            any = true;
            for (int i3 = 0; i3 < static_cast<int>(ct.size()); ++i3) {
                const double raw =
                    std::max(0.0, truth.interpolate(c1[static_cast<size_t>(i1)],
                                                    c2[static_cast<size_t>(i2)],
                                                    ct[static_cast<size_t>(i3)]));
                acc(grid.value_at(i1, i2, i3), transform_value(raw, fit.transform),
                    cell_volume);
            }
        }
    }
    if (!any) throw DataError("no grid cells inside the hull");
}

}  // namespace

SurfaceErrors surface_errors(const FitResult& fit, const TensorBasisSpec& spec,
                             const GroundTruth& truth, const HullRegion& hull, int refine) {
    SurfaceErrors errors;
    for_hull_cells(fit, spec, truth, hull, refine,
                   [&](double pred, double truth_working, double vol) {
                       const double d = pred - truth_working;
                       errors.ise += d * d * vol;
                       errors.max_abs = std::max(errors.max_abs, std::abs(d));
                   });
    return errors;
}

double integrated_squared_error(const FitResult& fit, const TensorBasisSpec& spec,
                                const GroundTruth& truth, const HullRegion& hull, int refine) {
    return surface_errors(fit, spec, truth, hull, refine).ise;
}

double max_abs_error(const FitResult& fit, const TensorBasisSpec& spec, const GroundTruth& truth,
                     const HullRegion& hull) {
    return surface_errors(fit, spec, truth, hull, 1).max_abs;
}

}  // namespace gwsmooth
