#include "gwsmooth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace gwsmooth {

const char* transform_name(Transform t) {
    return t == Transform::log1p ? "log1p" : "identity";
}

Transform transform_from_name(const std::string& name) {
    if (name == "log1p") return Transform::log1p;
    if (name == "identity") return Transform::identity;
    throw ConfigError("unknown transform '" + name + "' (expected log1p or identity)");
}

double transform_value(double raw, Transform t) {
    return t == Transform::log1p ? std::log1p(raw) : raw;
}

double back_transform_value(double working, Transform t) {
    return t == Transform::log1p ? std::expm1(working) : working;
}

Dataset Dataset::from_observations(std::vector<Observation> obs, Transform transform) {
    if (obs.empty()) throw DataError("dataset must contain at least one observation");
    Dataset ds;
    ds.transform_ = transform;
    ds.obs_ = std::move(obs);

    std::unordered_map<std::string, int> well_index;
    ds.s1_range_ = ds.s2_range_ = ds.t_range_ =
        CoordRange{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int i = 0; i < ds.n(); ++i) {
        const Observation& o = ds.obs_[static_cast<size_t>(i)];
        if (!std::isfinite(o.s1) || !std::isfinite(o.s2) || !std::isfinite(o.t) ||
            !std::isfinite(o.value)) {
            throw DataError("observation " + std::to_string(i) + " has a non-finite field");
        }
        if (transform == Transform::log1p && o.value < 0.0) {
            throw DataError("observation " + std::to_string(i) +
                            " has negative value under log1p transform");
        }
        auto [it, inserted] = well_index.try_emplace(o.well_id, static_cast<int>(ds.wells_.size()));
        if (inserted) ds.wells_.push_back(WellGroup{o.well_id, {}});
        ds.wells_[static_cast<size_t>(it->second)].obs.push_back(i);
        ds.s1_range_.lo = std::min(ds.s1_range_.lo, o.s1);
        ds.s1_range_.hi = std::max(ds.s1_range_.hi, o.s1);
        ds.s2_range_.lo = std::min(ds.s2_range_.lo, o.s2);
        ds.s2_range_.hi = std::max(ds.s2_range_.hi, o.s2);
        ds.t_range_.lo = std::min(ds.t_range_.lo, o.t);
        ds.t_range_.hi = std::max(ds.t_range_.hi, o.t);
    }
    return ds;
}

Eigen::VectorXd Dataset::s1_values() const {
    Eigen::VectorXd v(n());
    for (int i = 0; i < n(); ++i) v[i] = obs_[static_cast<size_t>(i)].s1;
    return v;
}

Eigen::VectorXd Dataset::s2_values() const {
    Eigen::VectorXd v(n());
    for (int i = 0; i < n(); ++i) v[i] = obs_[static_cast<size_t>(i)].s2;
    return v;
}

Eigen::VectorXd Dataset::t_values() const {
    Eigen::VectorXd v(n());
    for (int i = 0; i < n(); ++i) v[i] = obs_[static_cast<size_t>(i)].t;
    return v;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
    std::vector<Observation> picked;
    picked.reserve(indices.size());
    for (int i : indices) {
        if (i < 0 || i >= n()) throw ConfigError("subset index out of range");
        picked.push_back(obs_[static_cast<size_t>(i)]);
    }
    return from_observations(std::move(picked), transform_);
}

Eigen::VectorXd working_response(const Dataset& ds) {
    Eigen::VectorXd y(ds.n());
    for (int i = 0; i < ds.n(); ++i) {
        const double raw = ds.observation(i).value;
        if (ds.transform() == Transform::log1p && raw < 0.0) {
            throw DataError("observation " + std::to_string(i) +
                            " has negative value under log1p transform");
        }
        y[i] = transform_value(raw, ds.transform());
    }
    return y;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trimmed(s);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

// days since 1970-01-01 for a proleptic Gregorian date
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

bool parse_iso_date(const std::string& s, long& serial) {
    const std::string t = trimmed(s);
    int y = 0, m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream is(t);
    if (!(is >> y >> dash1 >> m >> dash2 >> d)) return false;
    if (dash1 != '-' || dash2 != '-' || !is.eof()) return false;
    if (m < 1 || m > 12 || d < 1 || d > 31) return false;
    serial = days_from_civil(y, m, d);
    return true;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, Transform transform) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input file: " + path.string());

    const std::vector<std::string> header = split_fields(line);
    int c_well = -1, c_s1 = -1, c_s2 = -1, c_t = -1, c_value = -1;
    for (size_t c = 0; c < header.size(); ++c) {
        const std::string name = trimmed(header[c]);
        if (name == "well_id") c_well = static_cast<int>(c);
        else if (name == "s1") c_s1 = static_cast<int>(c);
        else if (name == "s2") c_s2 = static_cast<int>(c);
        else if (name == "t") c_t = static_cast<int>(c);
        else if (name == "value") c_value = static_cast<int>(c);
    }
    if (c_well < 0 || c_s1 < 0 || c_s2 < 0 || c_t < 0 || c_value < 0) {
        throw DataError("missing required column(s) in " + path.string() +
                        "; expected header well_id,s1,s2,t,value");
    }
    const size_t need = static_cast<size_t>(
        std::max({c_well, c_s1, c_s2, c_t, c_value}) + 1);

    enum class TimeMode { unknown, numeric, date };
    TimeMode mode = TimeMode::unknown;

    std::vector<Observation> obs;
    std::vector<long> date_serials;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        const std::vector<std::string> f = split_fields(line);
        if (f.size() < need) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(need) + " fields, got " + std::to_string(f.size()));
        }
        Observation o;
        o.well_id = trimmed(f[static_cast<size_t>(c_well)]);
        if (o.well_id.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty well_id");
        }
        if (!parse_double(f[static_cast<size_t>(c_s1)], o.s1) ||
            !parse_double(f[static_cast<size_t>(c_s2)], o.s2)) {
            throw DataError("line " + std::to_string(line_no) + ": unparseable coordinate");
        }
        if (!parse_double(f[static_cast<size_t>(c_value)], o.value)) {
            throw DataError("line " + std::to_string(line_no) + ": unparseable value");
        }
        if (!std::isfinite(o.s1) || !std::isfinite(o.s2) || !std::isfinite(o.value)) {
            throw DataError("line " + std::to_string(line_no) + ": non-finite field");
        }
        if (transform == Transform::log1p && o.value < 0.0) {
            throw DataError("line " + std::to_string(line_no) +
                            ": negative value not allowed under log1p transform");
        }

        double t_num = 0.0;
        long serial = 0;
        if (parse_double(f[static_cast<size_t>(c_t)], t_num)) {
            if (mode == TimeMode::date) {
                throw DataError("line " + std::to_string(line_no) +
                                ": numeric t mixed with ISO dates");
            }
            mode = TimeMode::numeric;
            if (!std::isfinite(t_num)) {
                throw DataError("line " + std::to_string(line_no) + ": non-finite t");
            }
            o.t = t_num;
        } else if (parse_iso_date(f[static_cast<size_t>(c_t)], serial)) {
            if (mode == TimeMode::numeric) {
                throw DataError("line " + std::to_string(line_no) +
                                ": ISO date mixed with numeric t");
            }
            mode = TimeMode::date;
            date_serials.push_back(serial);
            o.t = static_cast<double>(serial);  // rebased below
        } else {
            throw DataError("line " + std::to_string(line_no) +
                            ": t is neither numeric nor an ISO date (YYYY-MM-DD)");
        }
        obs.push_back(std::move(o));
    }
    if (obs.empty()) throw DataError("no data rows in " + path.string());

    if (mode == TimeMode::date) {
        const long first = *std::min_element(date_serials.begin(), date_serials.end());
        for (Observation& o : obs) o.t -= static_cast<double>(first);
    }
    return Dataset::from_observations(std::move(obs), transform);
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << "well_id,s1,s2,t,value\n";
        char buf[512];
        for (const Observation& o : ds.observations()) {
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", o.well_id.c_str(),
                          o.s1, o.s2, o.t, o.value);
            out << buf;
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

bool ConvexPolygon::contains(double x, double y, double eps) const {
    if (vertices.size() < 3) return false;
    const Eigen::Vector2d p(x, y);
    const size_t m = vertices.size();
    double scale = 0.0;
    for (const auto& v : vertices) scale = std::max(scale, v.lpNorm<Eigen::Infinity>());
    const double tol = eps * std::max(1.0, scale * scale);
    for (size_t i = 0; i < m; ++i) {
        if (cross(vertices[i], vertices[(i + 1) % m], p) < -tol) return false;
    }
    return true;
}

double ConvexPolygon::area() const {
    double a = 0.0;
    const size_t m = vertices.size();
    for (size_t i = 0; i < m; ++i) {
        const Eigen::Vector2d& u = vertices[i];
        const Eigen::Vector2d& v = vertices[(i + 1) % m];
        a += u.x() * v.y() - v.x() * u.y();
    }
    return 0.5 * a;
}

HullRegion convex_hull_region(const Dataset& ds) {
    // distinct well locations (one point per well, first observation's coords)
    std::vector<Eigen::Vector2d> pts;
    for (const WellGroup& w : ds.wells()) {
        const Observation& o = ds.observation(w.obs.front());
        pts.emplace_back(o.s1, o.s2);
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) { return a == b; }),
              pts.end());
    if (pts.size() < 3) {
        throw DataError("convex hull requires at least 3 distinct well locations");
    }

    // Andrew's monotone chain, counter-clockwise; collinear points dropped
    const size_t m = pts.size();
    std::vector<Eigen::Vector2d> hull(2 * m);
    size_t k = 0;
    for (size_t i = 0; i < m; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = m - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) {
        throw DataError("well locations are collinear; convex hull is degenerate");
    }

    HullRegion region;
    region.polygon.vertices = std::move(hull);
    region.t_min = ds.t_range().lo;
    region.t_max = ds.t_range().hi;
    return region;
}

}  // namespace gwsmooth
