#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gwsmooth/selection.hpp"
#include "gwsmooth/simulate.hpp"

namespace gwsmooth {

/// Replicated criterion-comparison study: per replicate a fresh seeded
/// scenario dataset (seed = base_seed + replicate) is fitted with every
/// requested method against one shared PDE ground truth.
struct BenchConfig {
    std::vector<int> scenarios{1, 2, 3};
    std::vector<Method> methods{Method::aicc, Method::gcv,  Method::cv_obs, Method::cv_well,
                                Method::bic,  Method::map,  Method::bayes_avg};
    int replicates = 500;  ///< desk-scale runs typically use 50
    std::uint64_t base_seed = 1;
    std::array<int, 3> basis{14, 8, 5};
    int degree = 2;
    int penalty_order = 1;
    LambdaGrid grid = LambdaGrid::standard();
    PriorConfig prior;
    int cv_folds = 10;
    int threads = 0;  ///< 0 = hardware concurrency

    void validate() const;
};

struct ReplicateOutcome {
    bool valid = false;
    double ise = 0.0;
    double lambda = 0.0;   ///< chosen lambda (posterior median for bayes_avg)
    double max_err = 0.0;  ///< max abs deviation inside the hull (ballooning metric)
    std::string error;     ///< failure reason when !valid
};

struct MethodSummary {
    double mean_ise = 0.0;
    double std_error = 0.0;  ///< sd of per-replicate ISEs / sqrt(valid count)
    int n_valid = 0;
};

struct BenchResult {
    BenchConfig config;
    /// outcomes[{scenario, method}][replicate]
    std::map<std::pair<int, Method>, std::vector<ReplicateOutcome>> outcomes;
    std::map<std::pair<int, Method>, MethodSummary> summaries;

    const std::vector<ReplicateOutcome>& at(int scenario, Method m) const;
    const MethodSummary& summary(int scenario, Method m) const;
};

/// Runs the full study. Replicates execute in parallel but aggregate in
/// replicate order, so results are independent of the thread count. Throws
/// NumericalError if more than 10% of replicates fail for any
/// scenario/method pair.
BenchResult run_benchmark(const BenchConfig& cfg);

/// scenario,method,mean_ise,stderr,n_valid
void write_bench_results_csv(const std::filesystem::path& path, const BenchResult& result);

/// scenario,method,replicate,lambda — raw selected-lambda samples for
/// density-strip style summaries (failures omitted).
void write_lambda_samples_csv(const std::filesystem::path& path, const BenchResult& result);

}  // namespace gwsmooth
