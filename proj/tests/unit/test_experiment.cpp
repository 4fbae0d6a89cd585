#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "svsl/experiment.hpp"

using namespace svsl;
namespace fs = std::filesystem;

namespace {

// Small enough to run every method in a few seconds.
ExperimentConfig tiny_config() {
    auto c = ff_experiment_defaults();
    c.society.trajectories_per_agent = 20;
    c.society.pairs_per_kind = 10;
    c.eql.T = 1500;
    c.svsl.I = 2;
    c.svsl.N = 2;
    c.svsl_eql.T = 1500;
    c.svsl_eql.S_e = 5000;
    c.pbmorl.eql.T = 1500;
    c.pbmorl.eql.S_e = 5000;
    c.pbmorl.T_i = 400;
    c.pbmorl.N_s = 20;
    c.svslp.eql.T = 1500;
    c.svslp.eql.S_e = 5000;
    c.svslp.svsl.max_iterations = 2;
    c.svslp.N_s = 20;
    c.svslp.N_a = 3;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("svsl_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("method names round trip") {
    for (Method m : all_methods()) CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("dqn"), Error);
}

TEST_CASE("experiment config round trips and accepts flat method objects") {
    const auto c = tiny_config();
    const auto j = experiment_config_to_json(c);
    const auto back = experiment_config_from_json(j);
    CHECK(experiment_config_to_json(back) == j);

    const auto flat = experiment_config_from_json({{"T", 999}, {"K", 250}}, Method::Svslp);
    CHECK(flat.svslp.eql.T == 999);
    CHECK(flat.svslp.K == 250);
    CHECK(flat.eql.T == ff_experiment_defaults().eql.T);

    CHECK_THROWS_AS(experiment_config_from_json({{"gamma", 0.9}}), Error);
    CHECK_THROWS_AS(experiment_config_from_json({{"front_grid", 1}}), Error);
}

TEST_CASE("firefighters defaults per method") {
    const auto c = ff_experiment_defaults();
    CHECK(c.eql.T == 120000);
    CHECK(c.eql.b_pi == 32);
    CHECK_FALSE(c.eql.per);
    CHECK(c.svsl.L_max == 15);
    CHECK(c.svsl.I == 100);
    CHECK(c.svsl_eql.T == 200000);
    CHECK(c.svsl_eql.per);
    CHECK(c.pbmorl.T_i == 10000);
    CHECK(c.pbmorl.eql.T == 250000);
    CHECK(c.svslp.svsl.L_max == 10);
    CHECK(c.svslp.svsl.A_ref == 0.85);
    CHECK(c.svslp.N_a == 11);
    CHECK(c.svslp.eql.U_w);
}

TEST_CASE("metrics CSV formatting") {
    MetricRow r;
    r.seed = 3;
    r.method = Method::Svslp;
    SocietyScores s;
    s.coherence = {0.9, 0.85};
    s.representativeness = 0.925;
    s.conciseness = 0.0125;
    s.gamma = 0.074;
    s.num_clusters = 4;
    r.scores = s;
    r.pf_all = 5;
    r.pf_cls = 3;
    r.hv_all = 40.52;
    r.hv_cls = 38.0;
    r.mul_all = 0.1;
    r.mul_cls = 0.4;
    CHECK(metrics_csv_header(2) ==
          "seed,method,L,repr,chr_v1,chr_v2,conc,ray_turi,pf_all,pf_cls,hv_all,hv_cls,mul_all,mul_cls,error");
    CHECK(metrics_csv_row(r, 2) ==
          "3,svslp,4,0.925000,0.900000,0.850000,0.012500,0.074000,5,3,40.520000,38.000000,0.100000,0.400000,");

    MetricRow eql;
    eql.method = Method::Eql;
    eql.pf_all = eql.pf_cls = 2;
    CHECK(metrics_csv_row(eql, 2).rfind("0,eql,,,,,,,2,2,", 0) == 0);

    MetricRow failed;
    failed.method = Method::Svsl;
    failed.error = "boom, twice";
    CHECK(metrics_csv_row(failed, 2) == "0,svsl,,,,,,,,,,,,,boom; twice");
}

TEST_CASE("aggregate uses the population standard deviation") {
    std::vector<MetricRow> rows(2);
    for (int k = 0; k < 2; ++k) {
        rows[static_cast<std::size_t>(k)].method = Method::Eql;
        rows[static_cast<std::size_t>(k)].hv_all = k == 0 ? 30.0 : 40.0;
    }
    const auto csv = aggregate_csv(rows, 2);
    CHECK(csv.find("35.000000") != std::string::npos);
    CHECK(csv.find("5.000000") != std::string::npos);
}

TEST_CASE("fronts round trip through JSON") {
    Front f;
    f.provenance = "oracle";
    f.points.push_back({{7.8, 4.0}, {{1.0, 0.0}, {0.9, 0.1}}});
    const auto back = front_from_json(front_to_json(f));
    CHECK(back.provenance == "oracle");
    CHECK(back.points[0].value == f.points[0].value);
    CHECK(back.points[0].weights == f.points[0].weights);
}

TEST_CASE("dataset files reload and reject foreign environments") {
    const auto env = make_firefighters();
    const auto cfg = tiny_config();
    const auto ctx = make_seed_context(env, cfg, 4);
    const auto dir = scratch_dir("ds");
    fs::create_directories(dir);
    save_seed_context(dir / "d.jsonl", ctx, cfg);
    const auto back = load_seed_context(dir / "d.jsonl", env, cfg);
    CHECK(back.seed == 4);
    CHECK(back.agent_weights == ctx.agent_weights);
    CHECK(back.data.train.size() == ctx.data.train.size());
    FfOptions other;
    other.fi5_means_severe = true;
    CHECK_THROWS_AS(load_seed_context(dir / "d.jsonl", make_firefighters(other), cfg), Error);
    fs::remove_all(dir);
}

TEST_CASE("every method runs and a repeated run is bit-identical") {
    const auto env = make_firefighters();
    const auto cfg = tiny_config();
    const auto a = scratch_dir("a");
    const auto b = scratch_dir("b");
    const auto ra = run_experiment(env, cfg, {1}, all_methods(), a);
    const auto rb = run_experiment(env, cfg, {1}, all_methods(), b);
    REQUIRE(ra.rows.size() == 4);
    for (const auto& r : ra.rows) {
        INFO(to_string(r.method) << ": " << r.error);
        CHECK(r.error.empty());
        CHECK(r.pf_all >= 1);
        CHECK(r.mul_all >= 0.0);
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        INFO(rel.string());
        REQUIRE(fs::exists(b / rel));
        CHECK(slurp(entry.path()) == slurp(b / rel));
        ++compared;
    }
    CHECK(compared > 20);

    // Re-evaluation from checkpoints reproduces the stored rows.
    for (Method m : all_methods()) {
        const auto dir = a / (to_string(m) + "-seed1");
        REQUIRE(fs::exists(dir / "manifest.json"));
        const auto again = reevaluate_run_directory(dir, env);
        const auto stored = slurp(dir / "metrics.csv");
        CHECK(stored == metrics_csv_header(2) + "\n" + metrics_csv_row(again.row, 2) + "\n");
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("method streams are independent of each other") {
    auto a = method_rng(5, Method::Svsl);
    auto b = method_rng(5, Method::Svsl);
    auto c = method_rng(5, Method::Svslp);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
}
