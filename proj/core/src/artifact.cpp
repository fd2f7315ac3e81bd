#include "gwsmooth/artifact.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "gwsmooth/errors.hpp"

namespace gwsmooth {

namespace {

constexpr int kFormatVersion = 1;
constexpr char kBase64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

using json = nlohmann::ordered_json;

json vector_to_b64(const Eigen::VectorXd& v) {
    return json{{"encoding", "base64-le-f64"},
                {"count", v.size()},
                {"data", base64_encode(reinterpret_cast<const unsigned char*>(v.data()),
                                       static_cast<size_t>(v.size()) * sizeof(double))}};
}

Eigen::VectorXd vector_from_b64(const json& j) {
    if (j.at("encoding").get<std::string>() != "base64-le-f64") {
        throw DataError("unsupported numeric block encoding in artifact");
    }
    const std::vector<unsigned char> bytes = base64_decode(j.at("data").get<std::string>());
    const auto count = j.at("count").get<Eigen::Index>();
    if (bytes.size() != static_cast<size_t>(count) * sizeof(double)) {
        throw DataError("numeric block size mismatch in artifact");
    }
    Eigen::VectorXd v(count);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

}  // namespace

std::string base64_encode(const unsigned char* data, size_t size) {
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    for (size_t i = 0; i < size; i += 3) {
        unsigned int chunk = static_cast<unsigned int>(data[i]) << 16;
        if (i + 1 < size) chunk |= static_cast<unsigned int>(data[i + 1]) << 8;
        if (i + 2 < size) chunk |= static_cast<unsigned int>(data[i + 2]);
        out.push_back(kBase64Chars[(chunk >> 18) & 0x3f]);
        out.push_back(kBase64Chars[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < size ? kBase64Chars[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < size ? kBase64Chars[chunk & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw DataError("base64 block has invalid length");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + static_cast<size_t>(k)];
            if (c == '=') {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = value_of(c);
                if (vals[k] < 0 || pad > 0) throw DataError("invalid base64 character");
            }
        }
        const unsigned int chunk = (static_cast<unsigned int>(vals[0]) << 18) |
                                   (static_cast<unsigned int>(vals[1]) << 12) |
                                   (static_cast<unsigned int>(vals[2]) << 6) |
                                   static_cast<unsigned int>(vals[3]);
        out.push_back(static_cast<unsigned char>((chunk >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<unsigned char>((chunk >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<unsigned char>(chunk & 0xff));
    }
    return out;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digest: " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(hex);
}

void save_fit_artifact(const std::filesystem::path& path, const FitArtifact& artifact) {
    const FitResult& fit = artifact.fit;
    json j;
    j["format"] = "gwsmooth-fit";
    j["format_version"] = kFormatVersion;
    j["method"] = method_name(fit.method);
    j["transform"] = transform_name(fit.transform);

    json basis = json::array();
    for (const DimensionBasis& d : artifact.spec.dim) {
        basis.push_back(json{{"count", d.count}, {"degree", d.degree}, {"lo", d.lo}, {"hi", d.hi}});
    }
    j["basis"] = std::move(basis);
    j["penalty_order"] = artifact.spec.penalty_order;

    if (fit.lambda.has_value()) {
        j["lambda"] = *fit.lambda;
    } else {
        j["lambda"] = nullptr;
    }
    j["edf"] = fit.edf;
    j["rss"] = fit.rss;
    if (std::isfinite(fit.quad_form)) j["quad_form"] = fit.quad_form;
    j["n"] = fit.n;
    j["prior"] = json{{"a", fit.prior.a},
                      {"b", fit.prior.b},
                      {"lambda_prior", fit.prior.lambda_prior == LambdaPrior::uniform_on_lambda
                                           ? "uniform_on_lambda"
                                           : "uniform_on_log_lambda"}};
    j["grid"] = json{{"log10_lo", artifact.grid.log10_values[0]},
                     {"log10_hi", artifact.grid.log10_values[artifact.grid.size() - 1]},
                     {"count", artifact.grid.size()}};
    j["warnings"] = json{{"endpoint", fit.endpoint_warning}, {"fold", fit.fold_warning}};

    json hull = json::array();
    for (const Eigen::Vector2d& v : artifact.hull.polygon.vertices) {
        hull.push_back(json::array({v.x(), v.y()}));
    }
    j["hull"] = json{{"polygon", std::move(hull)},
                     {"t_min", artifact.hull.t_min},
                     {"t_max", artifact.hull.t_max}};
    j["data_digest"] = artifact.data_digest;
    j["coefficients"] = vector_to_b64(fit.alpha);
    if (fit.weights.size() > 0) j["weights"] = vector_to_b64(fit.weights);

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

FitArtifact load_fit_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open artifact: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("artifact is not valid JSON: " + std::string(e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != "gwsmooth-fit") {
            throw DataError("not a gwsmooth fit artifact");
        }
        if (j.at("format_version").get<int>() != kFormatVersion) {
            throw DataError("unsupported artifact format version");
        }

        FitArtifact artifact;
        FitResult& fit = artifact.fit;
        fit.method = method_from_name(j.at("method").get<std::string>());
        fit.transform = transform_from_name(j.at("transform").get<std::string>());

        const json& basis = j.at("basis");
        if (basis.size() != 3) throw DataError("artifact basis must have 3 dimensions");
        for (int d = 0; d < 3; ++d) {
            DimensionBasis& dim = artifact.spec.dim[static_cast<size_t>(d)];
            dim.count = basis[static_cast<size_t>(d)].at("count").get<int>();
            dim.degree = basis[static_cast<size_t>(d)].at("degree").get<int>();
            dim.lo = basis[static_cast<size_t>(d)].at("lo").get<double>();
            dim.hi = basis[static_cast<size_t>(d)].at("hi").get<double>();
        }
        artifact.spec.penalty_order = j.at("penalty_order").get<int>();
        artifact.spec.validate();

        if (!j.at("lambda").is_null()) fit.lambda = j.at("lambda").get<double>();
        fit.edf = j.at("edf").get<double>();
        fit.rss = j.at("rss").get<double>();
        fit.quad_form = j.contains("quad_form")
                            ? j.at("quad_form").get<double>()
                            : std::numeric_limits<double>::quiet_NaN();
        fit.n = j.at("n").get<int>();
        fit.prior.a = j.at("prior").at("a").get<double>();
        fit.prior.b = j.at("prior").at("b").get<double>();
        fit.prior.lambda_prior =
            j.at("prior").at("lambda_prior").get<std::string>() == "uniform_on_log_lambda"
                ? LambdaPrior::uniform_on_log_lambda
                : LambdaPrior::uniform_on_lambda;
        artifact.grid = LambdaGrid::linspace(j.at("grid").at("log10_lo").get<double>(),
                                             j.at("grid").at("log10_hi").get<double>(),
                                             j.at("grid").at("count").get<int>());
        fit.endpoint_warning = j.at("warnings").at("endpoint").get<bool>();
        fit.fold_warning = j.at("warnings").at("fold").get<bool>();

        for (const json& v : j.at("hull").at("polygon")) {
            artifact.hull.polygon.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
        }
        artifact.hull.t_min = j.at("hull").at("t_min").get<double>();
        artifact.hull.t_max = j.at("hull").at("t_max").get<double>();
        artifact.data_digest = j.at("data_digest").get<std::string>();

        fit.alpha = vector_from_b64(j.at("coefficients"));
        if (fit.alpha.size() != artifact.spec.coef_count()) {
            throw DataError("artifact coefficient count does not match basis spec");
        }
        if (j.contains("weights")) fit.weights = vector_from_b64(j.at("weights"));
        return artifact;
    } catch (const json::exception& e) {
        throw DataError("malformed artifact: " + std::string(e.what()));
    }
}

void write_score_trace_csv(const std::filesystem::path& path, const ScoreTrace& trace) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot open output file: " + tmp.string());
        out << "log10_lambda,map_logpost,aicc,gcv,bic,cv_obs,cv_well\n";
        char buf[512];
        auto cell = [&](double v) -> std::string {
            if (std::isnan(v)) return "";
            char num[64];
            std::snprintf(num, sizeof(num), "%.17g", v);
            return num;
        };
        for (Eigen::Index k = 0; k < trace.log10_lambda.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g,%s,%s,%s,%s,%s,%s\n", trace.log10_lambda[k],
                          cell(trace.map_logpost[k]).c_str(), cell(trace.aicc[k]).c_str(),
                          cell(trace.gcv[k]).c_str(), cell(trace.bic[k]).c_str(),
                          cell(trace.cv_obs[k]).c_str(), cell(trace.cv_well[k]).c_str());
            out << buf;
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace gwsmooth
