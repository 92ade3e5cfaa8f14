#pragma once

#include "iswerm/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace iswerm {

/// One logged round: context, action, outcome, and the propensity of the
/// action that was actually taken under the logging policy of that round.
struct LoggedRecord {
    std::int64_t t = 0;
    Vector context;
    int action = 0;
    double outcome = 0.0;
    double propensity = 1.0;
    double epsilon = 1.0;

    bool operator==(const LoggedRecord&) const = default;
};

struct LoggedDataset {
    std::vector<LoggedRecord> records;
    int num_arms = 2;
    int context_dim = 1;
    double beta = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return records.size(); }

    /// First `n` rounds as a dataset of its own. An epsilon-greedy log is a
    /// prefix-consistent process, so this equals a collection at horizon n.
    LoggedDataset prefix(std::size_t n) const;

    bool operator==(const LoggedDataset&) const = default;
};

/// Fixed reference weight g*(a|x) defining the target risk.
class ReferenceWeight {
public:
    enum class Kind { ConstantOne, UniformDensity, Dirac };

    static ReferenceWeight constant_one() { return ReferenceWeight(Kind::ConstantOne, 0); }
    static ReferenceWeight uniform_density() { return ReferenceWeight(Kind::UniformDensity, 0); }
    static ReferenceWeight dirac(int arm) { return ReferenceWeight(Kind::Dirac, arm); }

    Kind kind() const { return kind_; }
    int dirac_arm() const { return arm_; }

    /// g*(a|x); does not depend on x for the supported kinds.
    double operator()(int arm, int num_arms) const;
    /// sup_a g*(a|x).
    double sup(int num_arms) const;
    /// Throws if the kind is inconsistent with the arm count.
    void validate(int num_arms) const;

    std::string name() const;
    static ReferenceWeight parse(const std::string& text);

private:
    ReferenceWeight(Kind kind, int arm) : kind_(kind), arm_(arm) {}
    Kind kind_;
    int arm_;
};

struct Violation {
    long record = -1;  ///< -1 for dataset-level violations
    std::string message;
};

std::vector<Violation> validate_dataset(const LoggedDataset& ds);

/// JSON Lines: header {"K","d","beta","seed"} then one {"t","x","a","y","g","eps"} per record.
void write_jsonl(const LoggedDataset& ds, std::ostream& out);
void write_jsonl(const LoggedDataset& ds, const std::string& path);
LoggedDataset read_jsonl(std::istream& in);
LoggedDataset read_jsonl(const std::string& path);

}  // namespace iswerm
