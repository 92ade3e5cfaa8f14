#pragma once

#include "iswerm/collector.hpp"
#include "iswerm/dataset.hpp"

#include <array>
#include <string>

namespace iswerm {

enum class WeightScheme { Unweighted, ISWERM, ISFloorWERM, SqrtISWERM, SqrtISFloorWERM, MRDRWERM, MRDRFloorWERM };

inline constexpr std::array<WeightScheme, 7> kAllWeightSchemes = {
    WeightScheme::Unweighted,  WeightScheme::ISWERM,   WeightScheme::ISFloorWERM,  WeightScheme::SqrtISWERM,
    WeightScheme::SqrtISFloorWERM, WeightScheme::MRDRWERM, WeightScheme::MRDRFloorWERM};

/// CLI names: unweighted, iswerm, isfloor, sqrtis, sqrtisfloor, mrdr, mrdrfloor.
std::string scheme_name(WeightScheme scheme);
WeightScheme parse_scheme(const std::string& name);

/// Nonrandom propensity floor eps_t / K.
double floor_at(const ExplorationSchedule& schedule, std::int64_t t, int num_arms);

struct WeightOptions {
    /// Numerator of the ISWERM ratio; g* = 1 reproduces w = 1/g.
    ReferenceWeight gstar = ReferenceWeight::constant_one();
};

/// Per-record sample weights. Floors come from `schedule`; the overload
/// without one uses the dataset's logged beta with no extra floor.
Vector compute_weights(WeightScheme scheme, const LoggedDataset& ds, const ExplorationSchedule& schedule,
                       const WeightOptions& options = {});
Vector compute_weights(WeightScheme scheme, const LoggedDataset& ds, const WeightOptions& options = {});

}  // namespace iswerm
