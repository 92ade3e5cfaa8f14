#include "iswerm/weights.hpp"

#include <cmath>

namespace iswerm {

std::string scheme_name(WeightScheme scheme) {
    switch (scheme) {
        case WeightScheme::Unweighted: return "unweighted";
        case WeightScheme::ISWERM: return "iswerm";
        case WeightScheme::ISFloorWERM: return "isfloor";
        case WeightScheme::SqrtISWERM: return "sqrtis";
        case WeightScheme::SqrtISFloorWERM: return "sqrtisfloor";
        case WeightScheme::MRDRWERM: return "mrdr";
        case WeightScheme::MRDRFloorWERM: return "mrdrfloor";
    }
    return {};
}

WeightScheme parse_scheme(const std::string& name) {
    for (auto s : kAllWeightSchemes)
        if (scheme_name(s) == name) return s;
    throw Error("unknown weighting scheme '" + name +
                "' (expected unweighted|iswerm|isfloor|sqrtis|sqrtisfloor|mrdr|mrdrfloor)");
}

double floor_at(const ExplorationSchedule& schedule, std::int64_t t, int num_arms) {
    return epsilon_at(schedule, t) / num_arms;
}

Vector compute_weights(WeightScheme scheme, const LoggedDataset& ds, const ExplorationSchedule& schedule,
                       const WeightOptions& options) {
    options.gstar.validate(ds.num_arms);
    Vector w(static_cast<Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& r = ds.records[i];
        const double g = r.propensity;
        if (!(g > 0.0) || g > 1.0) throw Error("record " + std::to_string(i) + " has propensity outside (0,1]");
        const double f = floor_at(schedule, r.t, ds.num_arms);
        double v = 1.0;
        switch (scheme) {
            case WeightScheme::Unweighted: v = 1.0; break;
            case WeightScheme::ISWERM: v = options.gstar(r.action, ds.num_arms) / g; break;
            case WeightScheme::ISFloorWERM: v = 1.0 / f; break;
            case WeightScheme::SqrtISWERM: v = 1.0 / std::sqrt(g); break;
            case WeightScheme::SqrtISFloorWERM: v = 1.0 / std::sqrt(f); break;
            case WeightScheme::MRDRWERM: v = (1.0 - g) / (g * g); break;
            case WeightScheme::MRDRFloorWERM: v = (1.0 - f) / (f * f); break;
        }
        w[static_cast<Index>(i)] = v;
    }
    return w;
}

Vector compute_weights(WeightScheme scheme, const LoggedDataset& ds, const WeightOptions& options) {
    return compute_weights(scheme, ds, ExplorationSchedule{ds.beta, 0.0}, options);
}

}  // namespace iswerm
