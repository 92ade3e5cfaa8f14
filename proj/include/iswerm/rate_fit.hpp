#pragma once

#include "iswerm/types.hpp"

#include <cstdint>
#include <vector>

namespace iswerm {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double level = 0.95;
    double lo = 0.0;
    double hi = 0.0;
    int n_boot = 0;
};

struct RateFitOptions {
    int n_boot = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// OLS of log(loss) on log(T). Bootstrap resamples (T, loss) pairs.
RateFit fit_rate(const std::vector<double>& T, const std::vector<double>& losses, const RateFitOptions& options = {});

/// Same fit on per-T means of replication-level losses; the bootstrap
/// resamples replications independently within each T.
RateFit fit_rate_replicated(const std::vector<double>& T, const std::vector<std::vector<double>>& rep_losses,
                            const RateFitOptions& options = {});

/// Plain least-squares line through (x, y); returns {slope, intercept}.
std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace iswerm
