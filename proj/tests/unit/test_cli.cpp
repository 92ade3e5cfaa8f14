#include "iswerm/cli.hpp"
#include "iswerm/config.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace iswerm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "iswerm_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

struct Run {
    int code = 0;
    std::string out, err;
};

Run lab(std::vector<std::string> args) {
    args.insert(args.begin(), "iswerm_lab");
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

void write_config(const fs::path& path, const nlohmann::json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << j.dump(2);
}

}  // namespace

TEST_CASE("bandit bench produces the full scheme by model table") {
    const auto dir = scratch("bench");
    const auto cfg = dir.parent_path() / "bench.json";
    write_config(cfg, {{"env", {{"kind", "linear"}, {"d", 2}, {"K", 3}}},
                       {"bench", {{"n_reps", 2}, {"T", {500}}, {"T_test", 400}}},
                       {"learner", {{"lasso_grid_size", 5}}}});
    const auto r = lab({"--config", cfg.string(), "--out-dir", dir.string(), "--seed", "3", "bandit-bench"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto agg = lines(slurp(dir / "aggregate.csv"));
    CHECK(agg.size() == 1 + 21);
    CHECK(lines(slurp(dir / "results.csv")).size() == 1 + 42);
    CHECK(lines(slurp(dir / "comparisons.csv")).size() == 1 + 18);
    CHECK(fs::exists(dir / "plot" / "plot.gp"));
    CHECK(fs::exists(dir / "plot" / "cart.dat"));

    SUBCASE("identical configs give identical files") {
        const auto again = scratch("bench_again");
        REQUIRE(lab({"--config", cfg.string(), "--out-dir", again.string(), "--seed", "3", "--threads", "2",
                     "bandit-bench"})
                    .code == 0);
        for (const char* f : {"results.csv", "aggregate.csv", "comparisons.csv", "plot/ridge.dat"})
            CHECK(slurp(dir / f) == slurp(again / f));
    }
    SUBCASE("replay reproduces every artifact") {
        const auto replay = scratch("bench_replay");
        const auto rr = lab({"--out-dir", replay.string(), "replay", (dir / "manifest.json").string()});
        CHECK_MESSAGE(rr.code == 0, (rr.out + rr.err));
        // Tampering with a recorded output is detected.
        std::ofstream(replay / "results.csv", std::ios::app) << "x\n";
        const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
        bool found = false;
        for (const auto& a : manifest.at("artifacts"))
            if (a.at("path") == "results.csv") {
                CHECK(a.at("fnv1a64") != file_digest(replay / "results.csv"));
                found = true;
            }
        CHECK(found);
        CHECK(lab({"--out-dir", dir.string(), "replay", (dir / "manifest.json").string()}).code != 0);
    }
}

TEST_CASE("constant weights make ISWERM and unweighted wls agree") {
    const auto dir = scratch("bench_beta0");
    const auto cfg = dir.parent_path() / "beta0.json";
    write_config(cfg, {{"env", {{"kind", "linear"}, {"d", 2}, {"K", 3}}},
                       {"collect", {{"beta", 0}}},
                       {"bench", {{"n_reps", 3}, {"T", {300}}, {"schemes", {"unweighted", "iswerm"}}, {"models", {"wls"}}}}});
    REQUIRE(lab({"--config", cfg.string(), "--out-dir", dir.string(), "bandit-bench"}).code == 0);
    const auto rows = lines(slurp(dir / "results.csv"));
    REQUIRE(rows.size() == 1 + 6);
    for (std::size_t i = 1; i < rows.size(); i += 2) {
        const double a = std::stod(rows[i].substr(rows[i].rfind(',') + 1));
        const double b = std::stod(rows[i + 1].substr(rows[i + 1].rfind(',') + 1));
        CHECK(a == doctest::Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("collect, train, learn and evaluate chain") {
    const auto root = scratch("chain");
    const auto log = (root / "log.jsonl").string();
    auto r = lab({"--out-dir", (root / "c").string(), "--seed", "5", "collect", "--env",
                  "discrete:support=[[0],[1]],probs=[0.5,0.5],mu=[[0,1],[1,0]],noise=1", "--T", "400", "--beta",
                  "0.3333", "--out", log});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(log) == slurp(root / "c" / "data.jsonl"));

    r = lab({"--out-dir", (root / "t").string(), "train", "--data", log, "--model", "ridge", "--cv-folds", "3",
             "--lambda-grid", "0.5,5"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto model = nlohmann::json::parse(slurp(root / "t" / "model.json"));
    CHECK(model.dump().find("0.5") != std::string::npos);

    r = lab({"--out-dir", (root / "p").string(), "learn-policy", "--env",
             "discrete:support=[[0],[1]],probs=[0.5,0.5],mu=[[0,1],[1,0]],noise=1", "--data", log, "--class",
             "all_tables"});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    r = lab({"--out-dir", (root / "e").string(), "evaluate", "--env",
             "discrete:support=[[0],[1]],probs=[0.5,0.5],mu=[[0,1],[1,0]],noise=1", "--policy",
             (root / "p" / "policy.json").string(), "--n-test", "2000"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto ev = nlohmann::json::parse(slurp(root / "e" / "evaluation.json"));
    CHECK(ev.contains("regret"));

    r = lab({"--out-dir", (root / "tree").string(), "learn-policy", "--env",
             "discrete:support=[[0],[1]],probs=[0.5,0.5],mu=[[0,1],[1,0]],noise=1", "--data", log, "--class",
             "tree:1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
}

TEST_CASE("ingest writes the encoded table") {
    const auto root = scratch("ingest");
    fs::create_directories(root);
    std::ofstream(root / "in.csv") << "a,b,kind\n1,x,p\n2,y,q\nNA,x,p\n4,y,q\n";
    const auto r = lab({"--out-dir", (root / "o").string(), "ingest", "--data", (root / "in.csv").string(),
                        "--label-col", "kind", "--no-standardize"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(lines(slurp(root / "o" / "table.csv")).size() == 1 + 3);
}

TEST_CASE("errors give a nonzero exit") {
    const auto dir = scratch("errors");
    SUBCASE("empty T grid") {
        const auto r = lab({"--out-dir", dir.string(), "--set", "bench.T=[]", "bandit-bench"});
        CHECK(r.code != 0);
        CHECK(r.err.find("T") != std::string::npos);
    }
    SUBCASE("unknown config key") {
        const auto cfg = dir.parent_path() / "bad.json";
        write_config(cfg, {{"bench", {{"n_rep", 2}}}});
        CHECK(lab({"--config", cfg.string(), "--out-dir", dir.string(), "bandit-bench"}).code != 0);
    }
    SUBCASE("wrong type") {
        CHECK(lab({"--out-dir", dir.string(), "--set", "bench.n_reps=\"two\"", "bandit-bench"}).code != 0);
    }
    SUBCASE("failing theory check") {
        const auto r = lab({"--out-dir", dir.string(), "--set", "theory.sup_tolerance=0", "--set",
                            "theory.sup_reps=5", "--set", "theory.sup_T=[16,32,64]", "theory-check", "--suite",
                            "supscaling"});
        CHECK(r.code == 1);
        CHECK(r.out.find("FAIL") != std::string::npos);
    }
    SUBCASE("replay into the recorded directory is refused") {
        REQUIRE(lab({"--out-dir", dir.string(), "theory-check", "--suite", "lemma3"}).code == 0);
        CHECK(lab({"--out-dir", dir.string(), "replay", (dir / "manifest.json").string()}).code != 0);
    }
}

TEST_CASE("passing theory suites exit zero and write a report") {
    const auto dir = scratch("theory");
    const auto copy = dir.parent_path() / "theory_report.json";
    const auto r = lab({"--out-dir", dir.string(), "--set", "theory.lemma2_functions=100", "theory-check", "--suite",
                        "lemma2", "--out", copy.string()});
    CHECK_MESSAGE(r.code == 0, (r.out + r.err));
    const auto report = nlohmann::json::parse(slurp(copy));
    CHECK(report.size() >= 4);
}

TEST_CASE("config plumbing") {
    CHECK(lab({"--explain-config"}).out.find("bench.n_reps") != std::string::npos);
    const auto spec = parse_env_spec("linear:d=3,K=2,noise=0.5");
    CHECK(spec.at("kind") == "linear");
    CHECK(spec.at("d") == 3);
    const auto a = resolve_config({{"seed", 9}});
    auto b = default_config();
    set_config_value(b, "seed", 9);
    CHECK(config_hash(a) == config_hash(resolve_config(b)));
    CHECK_THROWS_AS(set_config_value(b, "nope.key", 1), Error);
}

TEST_CASE("the installed binary reports failures through its exit status") {
    const char* bin = std::getenv("ISWERM_LAB_BIN");
    if (bin == nullptr) return;
    const auto dir = scratch("binary");
    const std::string base = std::string(bin) + " --out-dir " + dir.string();
    CHECK(std::system((base + " --set bench.T=[] bandit-bench > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((base + " theory-check --suite lemma3 > /dev/null 2>&1").c_str()) == 0);
}

TEST_CASE("a sweep with zero regret reports no slope instead of failing") {
    const auto dir = scratch("sweep_zero");
    const auto r = lab({"--out-dir", dir.string(), "--set", "sweep.n_boot=20", "rate-sweep", "--reps", "3", "--env",
                        "discrete:support=[[0],[1]],probs=[0.5,0.5],mu=[[0,1],[1,0]],noise=0", "--T",
                        "[64,128,256,512]"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto fits = lines(slurp(dir / "rate_fits.csv"));
    REQUIRE(fits.size() == 1 + 2);
    CHECK(fits[1].find(",NA,") != std::string::npos);
}
