#pragma once

#include <filesystem>
#include <string>

#include "gwsmooth/dataset.hpp"
#include "gwsmooth/selection.hpp"
#include "gwsmooth/splines.hpp"

namespace gwsmooth {

/// Everything needed to reload and evaluate a fitted model: the fit itself,
/// its basis spec (including knot ranges), the trusted prediction region and
/// a digest of the input data.
struct FitArtifact {
    FitResult fit;
    TensorBasisSpec spec;
    HullRegion hull;
    LambdaGrid grid;
    std::string data_digest;  ///< fnv1a-64 hex of the input file bytes
};

/// Single JSON file, versioned, with coefficients as a base64 little-endian
/// f64 block. Written atomically (temp + rename) and byte-stable for
/// identical inputs.
void save_fit_artifact(const std::filesystem::path& path, const FitArtifact& artifact);
FitArtifact load_fit_artifact(const std::filesystem::path& path);

/// Fig-5 style diagnostic export:
/// log10_lambda,map_logpost,aicc,gcv,bic,cv_obs,cv_well
void write_score_trace_csv(const std::filesystem::path& path, const ScoreTrace& trace);

/// FNV-1a 64-bit digest of a file's raw bytes, as 16 lowercase hex chars.
std::string file_digest(const std::filesystem::path& path);

std::string base64_encode(const unsigned char* data, size_t size);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace gwsmooth
