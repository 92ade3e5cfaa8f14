#pragma once

#include "iswerm/collector.hpp"
#include "iswerm/environment.hpp"
#include "iswerm/model.hpp"
#include "iswerm/policy.hpp"
#include "iswerm/weights.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace iswerm {

/// One documented configuration key. `path` is dotted ("bench.n_reps").
struct ConfigKey {
    std::string path;
    nlohmann::json default_value;
    std::string types;  ///< '|'-separated subset of number|integer|string|boolean|array|null
    std::string doc;
};

const std::vector<ConfigKey>& config_schema();

/// Defaults for every key as one nested object.
nlohmann::json default_config();

/// Text listing of every key, its type, default, and meaning.
std::string explain_config();

/// Deep-merges `user` over the defaults. Unknown keys and type mismatches throw.
nlohmann::json resolve_config(const nlohmann::json& user);
nlohmann::json load_config_file(const std::string& path);

/// Sets a dotted key on a resolved config, validating against the schema.
void set_config_value(nlohmann::json& config, const std::string& path, const nlohmann::json& value);

/// Hex digest of the canonical (key-sorted, compact) serialization.
std::string config_hash(const nlohmann::json& config);

/// "linear:d=3,K=3,noise=1,coef_seed=7" -> {"kind": "linear", "d": 3, ...}.
nlohmann::json parse_env_spec(const std::string& spec);

EnvironmentPtr make_environment(const nlohmann::json& env_section);
ExplorationSchedule schedule_from(const nlohmann::json& collect_section);
GreedyModelSpec greedy_from(const nlohmann::json& collect_section);
LearnerOptions learner_from(const nlohmann::json& learner_section);
/// Policy class over the environment's support (finite kinds need a discrete env).
PolicyClass policy_class_from(const nlohmann::json& policy_section, const Environment* env);

std::vector<std::int64_t> horizon_grid(const nlohmann::json& array, const std::string& what);

}  // namespace iswerm
