#include "iswerm/rate_fit.hpp"

#include "iswerm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace iswerm {

std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), my};
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

namespace {

void check_inputs(const std::vector<double>& T, std::size_t n_losses, const RateFitOptions& options) {
    if (T.size() != n_losses) throw Error("rate fit: T and loss lists differ in length");
    if (std::set<double>(T.begin(), T.end()).size() < 3) throw Error("rate fit needs at least 3 distinct T values");
    for (double t : T)
        if (!(t > 0.0)) throw Error("rate fit: T values must be positive");
    if (options.n_boot < 0) throw Error("rate fit: n_boot must be >= 0");
    if (!(options.level > 0.0 && options.level < 1.0)) throw Error("rate fit: level must lie in (0, 1)");
}

double checked_log(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("rate fit: losses must be positive and finite");
    return std::log(v);
}

void finish(RateFit& fit, std::vector<double>& boot, const RateFitOptions& options) {
    fit.level = options.level;
    fit.n_boot = static_cast<int>(boot.size());
    if (boot.empty()) {
        fit.lo = fit.hi = fit.slope;
        return;
    }
    std::sort(boot.begin(), boot.end());
    const double alpha = (1.0 - options.level) / 2.0;
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(boot.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i);
        return i + 1 < boot.size() ? boot[i] * (1.0 - frac) + boot[i + 1] * frac : boot[i];
    };
    // Percentile interval, widened if needed so it always contains the estimate.
    fit.lo = std::min(quantile(alpha), fit.slope);
    fit.hi = std::max(quantile(1.0 - alpha), fit.slope);
}

}  // namespace

RateFit fit_rate(const std::vector<double>& T, const std::vector<double>& losses, const RateFitOptions& options) {
    check_inputs(T, losses.size(), options);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < T.size(); ++i) {
        lx.push_back(std::log(T[i]));
        ly.push_back(checked_log(losses[i]));
    }
    RateFit fit;
    std::tie(fit.slope, fit.intercept) = ols_line(lx, ly);

    Rng rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, T.size() - 1);
    std::vector<double> boot;
    std::vector<double> bx(T.size()), by(T.size());
    for (int b = 0; b < options.n_boot; ++b) {
        for (std::size_t i = 0; i < T.size(); ++i) {
            const auto j = pick(rng);
            bx[i] = lx[j];
            by[i] = ly[j];
        }
        const double s = ols_line(bx, by).first;
        if (std::isfinite(s)) boot.push_back(s);  // degenerate resamples (one distinct T) are skipped
    }
    finish(fit, boot, options);
    return fit;
}

RateFit fit_rate_replicated(const std::vector<double>& T, const std::vector<std::vector<double>>& rep_losses,
                            const RateFitOptions& options) {
    check_inputs(T, rep_losses.size(), options);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < T.size(); ++i) {
        if (rep_losses[i].empty()) throw Error("rate fit: no replications for a T value");
        lx.push_back(std::log(T[i]));
        ly.push_back(checked_log(mean(rep_losses[i])));
    }
    RateFit fit;
    std::tie(fit.slope, fit.intercept) = ols_line(lx, ly);

    Rng rng(options.seed);
    std::vector<double> boot, by(T.size());
    for (int b = 0; b < options.n_boot; ++b) {
        bool ok = true;
        for (std::size_t i = 0; i < T.size(); ++i) {
            const auto& reps = rep_losses[i];
            std::uniform_int_distribution<std::size_t> pick(0, reps.size() - 1);
            double s = 0.0;
            for (std::size_t r = 0; r < reps.size(); ++r) s += reps[pick(rng)];
            s /= static_cast<double>(reps.size());
            if (!(s > 0.0)) {
                ok = false;
                continue;
            }
            by[i] = std::log(s);
        }
        if (ok) boot.push_back(ols_line(lx, by).first);
    }
    finish(fit, boot, options);
    return fit;
}

}  // namespace iswerm
