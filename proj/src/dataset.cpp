#include "iswerm/dataset.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace iswerm {

LoggedDataset LoggedDataset::prefix(std::size_t n) const {
    if (n > records.size()) throw Error("prefix longer than dataset");
    LoggedDataset out;
    out.records.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n));
    out.num_arms = num_arms;
    out.context_dim = context_dim;
    out.beta = beta;
    out.seed = seed;
    return out;
}

double ReferenceWeight::operator()(int arm, int num_arms) const {
    switch (kind_) {
        case Kind::ConstantOne: return 1.0;
        case Kind::UniformDensity: return 1.0 / num_arms;
        case Kind::Dirac: return arm == arm_ ? 1.0 : 0.0;
    }
    return 0.0;
}

double ReferenceWeight::sup(int num_arms) const {
    return kind_ == Kind::UniformDensity ? 1.0 / num_arms : 1.0;
}

void ReferenceWeight::validate(int num_arms) const {
    if (kind_ == Kind::Dirac && (arm_ < 0 || arm_ >= num_arms))
        throw Error("dirac reference arm out of range");
}

std::string ReferenceWeight::name() const {
    switch (kind_) {
        case Kind::ConstantOne: return "one";
        case Kind::UniformDensity: return "uniform";
        case Kind::Dirac: return "dirac:" + std::to_string(arm_);
    }
    return {};
}

ReferenceWeight ReferenceWeight::parse(const std::string& text) {
    if (text == "one") return constant_one();
    if (text == "uniform") return uniform_density();
    if (text.rfind("dirac:", 0) == 0) {
        try {
            return dirac(std::stoi(text.substr(6)));
        } catch (const std::exception&) {
        }
    }
    throw Error("unknown reference weight '" + text + "' (expected one|uniform|dirac:<arm>)");
}

std::vector<Violation> validate_dataset(const LoggedDataset& ds) {
    std::vector<Violation> out;
    auto add = [&](long i, std::string msg) { out.push_back({i, std::move(msg)}); };

    if (ds.num_arms < 2) add(-1, "num_arms < 2");
    if (ds.context_dim < 1) add(-1, "context_dim < 1");

    std::vector<bool> seen(static_cast<std::size_t>(std::max(ds.num_arms, 0)), false);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        const long idx = static_cast<long>(i);
        if (r.t != static_cast<std::int64_t>(i) + 1) add(idx, "non-consecutive round index");
        if (r.context.size() != ds.context_dim) add(idx, "context dimension mismatch");
        if (!r.context.allFinite()) add(idx, "non-finite context entry");
        if (r.action < 0 || r.action >= ds.num_arms) {
            add(idx, "action out of range");
        } else {
            seen[static_cast<std::size_t>(r.action)] = true;
        }
        if (!std::isfinite(r.outcome)) add(idx, "non-finite outcome");
        if (!(r.epsilon > 0.0 && r.epsilon <= 1.0)) add(idx, "epsilon ∉ (0,1]");
        if (!(r.propensity > 0.0 && r.propensity <= 1.0)) {
            add(idx, "propensity ∉ (0,1]");
        } else if (ds.num_arms >= 2 && r.propensity < r.epsilon / ds.num_arms * (1.0 - 1e-12)) {
            // Tolerate one rounding step in (1-eps+eps/K) style arithmetic.
            add(idx, "propensity below epsilon/K floor");
        }
    }
    if (!ds.records.empty()) {
        for (std::size_t a = 0; a < seen.size(); ++a)
            if (!seen[a]) add(-1, "arm " + std::to_string(a) + " never pulled");
    }
    return out;
}

void write_jsonl(const LoggedDataset& ds, std::ostream& out) {
    nlohmann::ordered_json header;
    header["K"] = ds.num_arms;
    header["d"] = ds.context_dim;
    header["beta"] = ds.beta;
    header["seed"] = ds.seed;
    out << header.dump() << '\n';
    for (const auto& r : ds.records) {
        nlohmann::ordered_json line;
        line["t"] = r.t;
        line["x"] = std::vector<double>(r.context.data(), r.context.data() + r.context.size());
        line["a"] = r.action;
        line["y"] = r.outcome;
        line["g"] = r.propensity;
        line["eps"] = r.epsilon;
        out << line.dump() << '\n';
    }
}

void write_jsonl(const LoggedDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_jsonl(ds, out);
}

LoggedDataset read_jsonl(std::istream& in) {
    LoggedDataset ds;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            if (!have_header) {
                ds.num_arms = j.at("K").get<int>();
                ds.context_dim = j.at("d").get<int>();
                ds.beta = j.at("beta").get<double>();
                ds.seed = j.at("seed").get<std::uint64_t>();
                have_header = true;
                continue;
            }
            LoggedRecord r;
            r.t = j.at("t").get<std::int64_t>();
            auto x = j.at("x").get<std::vector<double>>();
            r.context = Eigen::Map<const Vector>(x.data(), static_cast<Index>(x.size()));
            r.action = j.at("a").get<int>();
            r.outcome = j.at("y").get<double>();
            r.propensity = j.at("g").get<double>();
            r.epsilon = j.at("eps").get<double>();
            ds.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw Error("missing dataset header line");
    return ds;
}

LoggedDataset read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_jsonl(in);
}

}  // namespace iswerm
