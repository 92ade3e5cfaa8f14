#include "iswerm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace iswerm {

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Artifacts::Artifacts(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

void Artifacts::write(const std::string& relative, const std::string& content) {
    const auto path = root_ / relative;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
    written_.push_back(relative);
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::ClearlyBetter: return "clearly_better";
        case Verdict::ClearlyWorse: return "clearly_worse";
        case Verdict::Indistinguishable: return "indistinguishable";
    }
    return {};
}

Verdict compare_one_se(double mean_a, double se_a, double mean_b, double se_b) {
    if (mean_a + se_a < mean_b - se_b) return Verdict::ClearlyBetter;
    if (mean_a - se_a > mean_b + se_b) return Verdict::ClearlyWorse;
    return Verdict::Indistinguishable;
}

BenchResult run_bandit_bench(const ExperimentConfig& config) {
    BenchResult out;
    out.experiment = replicate_experiment(config);
    std::map<std::tuple<std::int64_t, int, int>, const AggregateRow*> index;
    for (const auto& a : out.experiment.aggregate)
        index[{a.T, static_cast<int>(a.scheme), static_cast<int>(a.model)}] = &a;
    for (const auto T : config.T_grid) {
        for (const auto model : config.models) {
            const auto base = index.find({T, static_cast<int>(WeightScheme::ISWERM), static_cast<int>(model)});
            if (base == index.end()) continue;
            for (const auto scheme : config.schemes) {
                if (scheme == WeightScheme::ISWERM) continue;
                const AggregateRow& a = *base->second;
                const AggregateRow& b = *index.at({T, static_cast<int>(scheme), static_cast<int>(model)});
                Comparison c{scheme, model, T, a.mean, a.se.value_or(0.0), b.mean, b.se.value_or(0.0)};
                c.verdict = compare_one_se(c.iswerm_mean, c.iswerm_se, c.other_mean, c.other_se);
                out.comparisons.push_back(c);
            }
        }
    }
    return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "scheme,model,beta,T,rep,loss\n";
    for (const auto& r : rows)
        os << scheme_name(r.scheme) << ',' << model_name(r.model) << ',' << format_double(r.beta) << ',' << r.T
           << ',' << r.rep << ',' << format_double(r.loss) << '\n';
    return os.str();
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::ostringstream os;
    os << "scheme,model,beta,T,mean,se\n";
    for (const auto& r : rows)
        os << scheme_name(r.scheme) << ',' << model_name(r.model) << ',' << format_double(r.beta) << ',' << r.T
           << ',' << format_double(r.mean) << ',' << (r.se ? format_double(*r.se) : "NA") << '\n';
    return os.str();
}

std::string comparisons_csv(const std::vector<Comparison>& rows) {
    std::ostringstream os;
    os << "model,T,other,iswerm_mean,iswerm_se,other_mean,other_se,verdict\n";
    for (const auto& c : rows)
        os << model_name(c.model) << ',' << c.T << ',' << scheme_name(c.other) << ',' << format_double(c.iswerm_mean)
           << ',' << format_double(c.iswerm_se) << ',' << format_double(c.other_mean) << ','
           << format_double(c.other_se) << ',' << verdict_name(c.verdict) << '\n';
    return os.str();
}

void write_bench_outputs(const BenchResult& result, Artifacts& out) {
    out.write("results.csv", results_csv(result.experiment.rows));
    out.write("aggregate.csv", aggregate_csv(result.experiment.aggregate));
    out.write("comparisons.csv", comparisons_csv(result.comparisons));

    // One gnuplot index block per scheme: x = T, y = mean, yerr = se.
    std::map<int, std::map<int, std::vector<const AggregateRow*>>> by_model;
    for (const auto& a : result.experiment.aggregate)
        by_model[static_cast<int>(a.model)][static_cast<int>(a.scheme)].push_back(&a);
    std::ostringstream gp;
    gp << "# gnuplot -p plot.gp\nset logscale x\nset xlabel 'T'\nset ylabel 'test MSE'\n";
    for (const auto& [model, schemes] : by_model) {
        const auto name = model_name(static_cast<ModelKind>(model));
        std::ostringstream dat;
        std::vector<std::string> titles;
        for (const auto& [scheme, rows] : schemes) {
            dat << "# " << scheme_name(static_cast<WeightScheme>(scheme)) << "\n# T mean se\n";
            for (const auto* r : rows)
                dat << r->T << ' ' << format_double(r->mean) << ' ' << (r->se ? format_double(*r->se) : "NA") << '\n';
            dat << "\n\n";
            titles.push_back(scheme_name(static_cast<WeightScheme>(scheme)));
        }
        out.write("plot/" + name + ".dat", dat.str());
        gp << "set title '" << name << "'\nplot ";
        for (std::size_t i = 0; i < titles.size(); ++i)
            gp << (i ? ", \\\n     " : "") << "'" << name << ".dat' index " << i
               << " using 1:2:3 with yerrorlines title '" << titles[i] << "'";
        gp << "\npause -1\n";
    }
    out.write("plot/plot.gp", gp.str());
}

RateSweepResult run_rate_sweep(const PolicySweepConfig& config, const RateSweepOptions& options) {
    config.validate();
    const std::size_t min_points = options.exclude_smallest ? 4 : 3;
    if (config.T_grid.size() < min_points)
        throw Error("rate sweep needs at least " + std::to_string(min_points) + " horizons");
    if (options.margin_nu) {
        if (!(*options.margin_nu > 0.0)) throw Error("margin exponent must be positive");
        const auto* finite = std::get_if<FinitePolicyClass>(&config.policy_class);
        if (finite == nullptr)
            throw Error("fast-rate comparison needs a finite policy class so that realizability can be checked");
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < finite->size(); ++i)
            best = std::min(best, excess_risk(as_score(Policy{finite->member(i)}), *config.env,
                                              ReferenceWeight::constant_one(), LossKind::PolicyValue, config.excess)
                                      .value);
        if (best > 1e-12)
            throw Error("policy class does not contain the optimal policy; fast-rate comparison is undefined");
    }

    RateSweepResult out;
    out.rows = replicate_policy_regret(config);
    const std::size_t nt = config.T_grid.size();
    for (double beta : config.betas) {
        RateSweepEntry e;
        e.beta = beta;
        e.T = config.T_grid;
        e.slow_target = -(1.0 - beta) / 2.0;
        if (options.margin_nu) {
            const double nu = *options.margin_nu;
            e.fast_target = std::isinf(nu) ? -(1.0 - beta) : -(1.0 - beta) * (1.0 + nu) / (2.0 + nu);
        }
        std::vector<std::vector<double>> per_t(nt);
        for (const auto& r : out.rows)
            if (r.beta == beta)
                for (std::size_t i = 0; i < nt; ++i)
                    if (r.T == config.T_grid[i]) per_t[i].push_back(r.regret);
        std::vector<double> fit_T;
        std::vector<std::vector<double>> fit_losses;
        for (std::size_t i = 0; i < nt; ++i) {
            double m = 0.0;
            for (double v : per_t[i]) m += v;
            m /= static_cast<double>(per_t[i].size());
            double ss = 0.0;
            for (double v : per_t[i]) ss += (v - m) * (v - m);
            const double n = static_cast<double>(per_t[i].size());
            e.mean_regret.push_back(m);
            e.se_regret.push_back(n > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::nan(""));
            const bool used = !(options.exclude_smallest && i == 0);
            e.used_in_fit.push_back(used);
            if (used) {
                fit_T.push_back(static_cast<double>(config.T_grid[i]));
                fit_losses.push_back(per_t[i]);
            }
        }
        RateFitOptions fo = options.fit;
        fo.seed = child_seed(config.seed, 0, "rate-fit:beta=" + std::to_string(beta));
        const bool all_positive = std::all_of(fit_losses.begin(), fit_losses.end(), [](const auto& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) > 0.0;
        });
        try {
            if (all_positive) e.fit = fit_rate_replicated(fit_T, fit_losses, fo);
        } catch (const std::exception& ex) {
            throw Error("rate fit for beta " + std::to_string(beta) + ": " + ex.what());
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

void write_rate_outputs(const RateSweepResult& result, Artifacts& out) {
    std::ostringstream rows;
    rows << "beta,T,rep,regret\n";
    for (const auto& r : result.rows)
        rows << format_double(r.beta) << ',' << r.T << ',' << r.rep << ',' << format_double(r.regret) << '\n';
    out.write("regret.csv", rows.str());

    std::ostringstream fits;
    fits << "beta,slope,intercept,level,lo,hi,n_boot,slow_target,covers_slow,fast_target,covers_fast\n";
    for (const auto& e : result.entries) {
        if (!e.fit) {
            fits << format_double(e.beta) << ",NA,NA,NA,NA,NA,0," << format_double(e.slow_target) << ",NA,"
                 << (e.fast_target ? format_double(*e.fast_target) : "NA") << ",NA\n";
            continue;
        }
        const auto& f = *e.fit;
        const auto covers = [&](double t) { return f.lo <= t && t <= f.hi ? "true" : "false"; };
        fits << format_double(e.beta) << ',' << format_double(f.slope) << ',' << format_double(f.intercept) << ','
             << format_double(f.level) << ',' << format_double(f.lo) << ',' << format_double(f.hi) << ','
             << f.n_boot << ',' << format_double(e.slow_target) << ','
             << covers(e.slow_target) << ',' << (e.fast_target ? format_double(*e.fast_target) : "NA") << ','
             << (e.fast_target ? covers(*e.fast_target) : "NA") << '\n';
    }
    out.write("rate_fits.csv", fits.str());

    std::ostringstream dat, gp;
    gp << "# gnuplot -p plot.gp\nset logscale xy\nset xlabel 'T'\nset ylabel 'expected regret'\nplot ";
    for (std::size_t b = 0; b < result.entries.size(); ++b) {
        const auto& e = result.entries[b];
        dat << "# beta " << format_double(e.beta) << "\n# T mean se\n";
        for (std::size_t i = 0; i < e.T.size(); ++i)
            dat << e.T[i] << ' ' << format_double(e.mean_regret[i]) << ' ' << format_double(e.se_regret[i]) << '\n';
        dat << "\n\n";
        gp << (b ? ", \\\n     " : "") << "'regret.dat' index " << b << " using 1:2:3 with yerrorlines title 'beta="
           << format_double(e.beta) << "'";
    }
    gp << "\npause -1\n";
    out.write("plot/regret.dat", dat.str());
    out.write("plot/plot.gp", gp.str());
}

}  // namespace iswerm
