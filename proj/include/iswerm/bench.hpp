#pragma once

#include "iswerm/evaluation.hpp"
#include "iswerm/rate_fit.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iswerm {

/// Shortest round-trip decimal form ("%.17g"); "NA" for NaN.
std::string format_double(double v);

/// Files written under one output directory, in creation order.
class Artifacts {
public:
    explicit Artifacts(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    const std::vector<std::string>& written() const { return written_; }

    /// Writes `content` to root/relative and records the relative path.
    void write(const std::string& relative, const std::string& content);

private:
    std::filesystem::path root_;
    std::vector<std::string> written_;
};

enum class Verdict { ClearlyBetter, ClearlyWorse, Indistinguishable };
std::string verdict_name(Verdict v);

/// One-standard-error rule: better when mean_a + se_a < mean_b - se_b, worse
/// when mean_a - se_a > mean_b + se_b, otherwise indistinguishable. Lower is better.
Verdict compare_one_se(double mean_a, double se_a, double mean_b, double se_b);

struct Comparison {
    WeightScheme other;
    ModelKind model;
    std::int64_t T = 0;
    double iswerm_mean = 0.0;
    double iswerm_se = 0.0;
    double other_mean = 0.0;
    double other_se = 0.0;
    Verdict verdict = Verdict::Indistinguishable;
};

struct BenchResult {
    ExperimentResult experiment;
    std::vector<Comparison> comparisons;  ///< ISWERM against every other selected scheme
};

BenchResult run_bandit_bench(const ExperimentConfig& config);

std::string results_csv(const std::vector<ResultRow>& rows);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);
std::string comparisons_csv(const std::vector<Comparison>& rows);

/// results.csv, aggregate.csv, comparisons.csv, one plot/<model>.dat per model
/// (blocks per scheme: T mean se) and plot/plot.gp.
void write_bench_outputs(const BenchResult& result, Artifacts& out);

struct RateSweepOptions {
    bool exclude_smallest = true;
    RateFitOptions fit;
    /// Margin exponent; enables the fast-rate target -(1-beta)(1+nu)/(2+nu).
    std::optional<double> margin_nu;
};

struct RateSweepEntry {
    double beta = 0.0;
    /// Absent when some fitted horizon has zero mean regret (nothing to take the log of).
    std::optional<RateFit> fit;
    double slow_target = 0.0;
    std::optional<double> fast_target;
    std::vector<std::int64_t> T;     ///< every horizon of the sweep
    std::vector<double> mean_regret;  ///< per horizon
    std::vector<double> se_regret;
    std::vector<bool> used_in_fit;
};

struct RateSweepResult {
    std::vector<RegretRow> rows;
    std::vector<RateSweepEntry> entries;  ///< one per beta
};

/// Throws when the fast-rate comparison is requested but the policy class
/// does not contain the optimal policy (checked exactly on finite classes).
RateSweepResult run_rate_sweep(const PolicySweepConfig& config, const RateSweepOptions& options = {});

/// regret.csv (beta,T,rep,regret), rate_fits.csv, plot/regret.dat, plot/plot.gp.
void write_rate_outputs(const RateSweepResult& result, Artifacts& out);

}  // namespace iswerm
