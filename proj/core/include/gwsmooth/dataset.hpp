#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

/// Response-scale transform applied before model fitting. log1p maps a raw
/// concentration y to log(y + 1), which is defined at y = 0.
enum class Transform { identity, log1p };

const char* transform_name(Transform t);
Transform transform_from_name(const std::string& name);

struct Observation {
    std::string well_id;
    double s1 = 0.0;  ///< easting, site units
    double s2 = 0.0;  ///< northing, site units
    double t = 0.0;   ///< time, days since first sample (or as given)
    double value = 0.0;  ///< raw concentration
};

struct WellGroup {
    std::string id;
    std::vector<int> obs;  ///< indices into Dataset::observations(), file order
};

struct CoordRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Immutable collection of spatiotemporal well samples. Observations keep
/// file order; wells are grouped by id in order of first appearance.
class Dataset {
  public:
    static Dataset from_observations(std::vector<Observation> obs, Transform transform);

    int n() const { return static_cast<int>(obs_.size()); }
    const std::vector<Observation>& observations() const { return obs_; }
    const Observation& observation(int i) const { return obs_[static_cast<size_t>(i)]; }
    const std::vector<WellGroup>& wells() const { return wells_; }
    int well_count() const { return static_cast<int>(wells_.size()); }
    Transform transform() const { return transform_; }

    CoordRange s1_range() const { return s1_range_; }
    CoordRange s2_range() const { return s2_range_; }
    CoordRange t_range() const { return t_range_; }

    Eigen::VectorXd s1_values() const;
    Eigen::VectorXd s2_values() const;
    Eigen::VectorXd t_values() const;

    /// Subset by observation index (keeps relative order); used by CV folds.
    Dataset subset(const std::vector<int>& indices) const;

  private:
    std::vector<Observation> obs_;
    std::vector<WellGroup> wells_;
    Transform transform_ = Transform::log1p;
    CoordRange s1_range_, s2_range_, t_range_;
};

/// Reads a `well_id,s1,s2,t,value` CSV (UTF-8, header required, extra columns
/// ignored). `t` may be numeric or an ISO-8601 date; dates are converted to
/// days since the earliest sample. Throws DataError on malformed rows and on
/// negative values when the transform is log1p.
Dataset load_csv(const std::filesystem::path& path, Transform transform = Transform::log1p);

void write_csv(const std::filesystem::path& path, const Dataset& ds);

/// Element-wise working response: log(value+1) under log1p, raw otherwise.
Eigen::VectorXd working_response(const Dataset& ds);

double transform_value(double raw, Transform t);
double back_transform_value(double working, Transform t);

/// Convex polygon with counter-clockwise vertex order.
struct ConvexPolygon {
    std::vector<Eigen::Vector2d> vertices;

    /// Inclusive point-in-polygon test (boundary counts as inside).
    bool contains(double x, double y, double eps = 1e-12) const;
    double area() const;
};

/// Trusted prediction domain: spatial hull of the wells plus the sampled
/// time interval.
struct HullRegion {
    ConvexPolygon polygon;
    double t_min = 0.0;
    double t_max = 0.0;
};

/// Convex hull of the distinct well locations and the observed time range.
/// Requires at least 3 non-collinear well positions.
HullRegion convex_hull_region(const Dataset& ds);

}  // namespace gwsmooth
