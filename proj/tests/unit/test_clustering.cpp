#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "svsl/clustering.hpp"
#include "svsl/society.hpp"

using namespace svsl;

namespace {

SocietyScores scores(double chr, double repr, double conc, int L, double gamma = -1) {
    SocietyScores s;
    s.grounding_coherence = chr;
    s.coherence = {chr, chr};
    s.representativeness = repr;
    s.conciseness = conc;
    s.num_clusters = L;
    s.gamma = gamma >= 0 ? gamma : gamma_index(repr, conc);
    return s;
}

Solution with_scores(SocietyScores s, Assignment beta = {0}) {
    Solution sol;
    sol.scores = std::move(s);
    sol.beta = std::move(beta);
    return sol;
}

// Two groups of agents with opposite priorities, labelled by a hidden grounding.
struct TwoGroups {
    TabularMomdp env;
    RewardTable truth;
    Dataset train;
};

TwoGroups two_groups(Rng& rng) {
    auto env = testutil::random_momdp(6, 3, 2, 6, rng);
    const RewardTable truth = env.reward_table();
    std::vector<TrajectoryRef> pool;
    for (int k = 0; k < 40; ++k)
        pool.push_back(make_trajectory_ref(static_cast<std::uint64_t>(k + 1),
                                           testutil::random_steps(6, 3, 1 + static_cast<int>(uniform_index(rng, 5)), rng),
                                           env.config()));
    Dataset d(6, 2);
    for (int j = 0; j < 6; ++j) {
        const Weights w = j < 3 ? Weights{0.9, 0.1} : Weights{0.1, 0.9};
        for (int k = 0; k < 60; ++k) {
            const auto a = pool[uniform_index(rng, pool.size())];
            auto b = pool[uniform_index(rng, pool.size())];
            while (b == a) b = pool[uniform_index(rng, pool.size())];
            d.add(oracle_answer(j, w, a, b, truth));
        }
    }
    return {std::move(env), truth, std::move(d)};
}

}  // namespace

TEST_CASE("e-step picks the least discordant cluster, lowest index on ties") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const auto data = testutil::random_dataset(4, 8, 4, 2, 2, rng);
        RewardTable g(8, 2);
        for (auto& v : g.values) v = static_cast<double>(static_cast<int>(uniform_index(rng, 3)) - 1);
        ValueSystemBank bank(5, 2);
        bank.initialize(rng);
        AgentRows rows;
        for (int j = 0; j < 4; ++j) {
            rows.rows.emplace_back();
            for (const auto& r : data.agent_records(j)) rows.rows.back().push_back(&r);
        }
        const auto beta = e_step(bank, g, rows);
        for (int j = 0; j < 4; ++j) {
            std::vector<double> d;
            for (int l = 0; l < 5; ++l) {
                int miss = 0;
                for (const auto* r : rows.rows[static_cast<std::size_t>(j)]) {
                    const auto w = bank.weights(l);
                    const auto ga = testutil::naive_return(r->first->trajectory, g, 2, 1.0);
                    const auto gb = testutil::naive_return(r->second->trajectory, g, 2, 1.0);
                    if (testutil::naive_label(w[0] * ga[0] + w[1] * ga[1], w[0] * gb[0] + w[1] * gb[1]) != r->value_system) ++miss;
                }
                d.push_back(static_cast<double>(miss) / static_cast<double>(rows.rows[static_cast<std::size_t>(j)].size()));
            }
            CHECK(cluster_discordances(bank, g, rows.rows[static_cast<std::size_t>(j)]) == d);
            CHECK(beta[static_cast<std::size_t>(j)] == static_cast<int>(argmin(d)));
        }
    }
}

TEST_CASE("merging keeps the more populated cluster and frees the other row") {
    Rng rng(1);
    ValueSystemBank bank(4, 2);
    bank.initialize(rng);
    bank.omega() = {0.0, 0.0, 0.01, 0.0, 3.0, 0.0, -3.0, 0.0};
    Assignment beta{0, 1, 1, 2};
    const auto before2 = bank.weights(2);
    CHECK(merge_clusters(beta, bank, 0.05, rng) == 1);
    CHECK(beta == Assignment{1, 1, 1, 2});
    CHECK(bank.weights(2) == before2);
    // Nothing left to merge.
    CHECK(merge_clusters(beta, bank, 0.05, rng) == 0);
}

TEST_CASE("equal-size merge keeps the lower index") {
    Rng rng(2);
    ValueSystemBank bank(3, 2);
    bank.initialize(rng);
    bank.omega() = {1.0, 0.0, 1.0, 0.0, -2.0, 2.0};
    Assignment beta{2, 0, 1};
    CHECK(merge_clusters(beta, bank, 0.05, rng) == 1);
    CHECK(beta == Assignment{2, 0, 0});
}

TEST_CASE("only the worst-gap multiplier grows, every multiplier decays and stays non-negative") {
    LagrangeState st = LagrangeState::initial(3, 1.0);
    st.max_coherence = {0.9, 0.95, 0.8};
    const std::vector<double> losses{0.4, 0.6, 0.2};
    update_multipliers(st, losses, std::vector<double>{0.85, 0.7, 0.8}, 0.1, 0.5);
    CHECK(st.multipliers[0] == doctest::Approx(0.9));
    CHECK(st.multipliers[1] == doctest::Approx(0.9 + 0.5 * 0.6));
    CHECK(st.multipliers[2] == doctest::Approx(0.9));
    // No positive gap: pure decay.
    update_multipliers(st, losses, std::vector<double>{1.0, 1.0, 1.0}, 0.1, 0.5);
    CHECK(st.multipliers[0] == doctest::Approx(0.81));
    for (double l : st.multipliers) CHECK(l >= 0.0);
}

TEST_CASE("running maximum coherence") {
    CHECK(update_max_coherence(0.8, 0.9, 0.99) == doctest::Approx(0.01 * 0.9 + 0.99 * 0.8));
    CHECK(update_max_coherence(0.8, 0.7, 0.99) == doctest::Approx(0.8));
}

TEST_CASE("solution dominance uses all four objectives") {
    CHECK(solution_dominates(scores(0.9, 0.9, 0.2, 2), scores(0.9, 0.9, 0.2, 3)));
    CHECK_FALSE(solution_dominates(scores(0.9, 0.9, 0.2, 2), scores(0.9, 0.9, 0.2, 2)));
    CHECK_FALSE(solution_dominates(scores(0.95, 0.8, 0.2, 2), scores(0.9, 0.9, 0.2, 2)));
}

TEST_CASE("rank selection probabilities are proportional to reversed rank") {
    std::vector<Solution> mem;
    mem.push_back(with_scores(scores(0.9, 0.8, 0.0, 2)));  // Gamma 0.2
    mem.push_back(with_scores(scores(0.9, 0.9, 0.0, 2)));  // Gamma 0.1
    mem.push_back(with_scores(scores(0.8, 0.7, 0.0, 2)));  // Gamma 0.3
    CHECK(rank_order(mem) == std::vector<std::size_t>{1, 0, 2});
    const auto p = selection_probabilities(mem);
    CHECK(p[1] == doctest::Approx(3.0 / 6.0));
    CHECK(p[0] == doctest::Approx(2.0 / 6.0));
    CHECK(p[2] == doctest::Approx(1.0 / 6.0));
    Rng rng(3);
    std::vector<int> hits(3, 0);
    for (int k = 0; k < 60000; ++k) ++hits[select_solution(mem, rng)];
    CHECK(hits[1] / 60000.0 == doctest::Approx(0.5).epsilon(0.03));
    CHECK(best_member(mem) == 1);
}

TEST_CASE("eviction protects the best coherence and best Gamma members") {
    std::vector<Solution> mem;
    mem.push_back(with_scores(scores(0.99, 0.5, 0.0, 2)));        // best coherence
    mem.push_back(with_scores(scores(0.7, 0.95, 0.0, 2)));        // best Gamma
    mem.push_back(with_scores(scores(0.8, 0.8, 0.0, 5)));         // most clusters
    mem.push_back(with_scores(scores(0.8, 0.8, 0.0, 3)));
    CHECK(worst_member(mem) == 2);
    // Even with the most clusters, a protected member is never evicted.
    mem[0].scores.num_clusters = 9;
    CHECK(worst_member(mem) == 2);
    // Ties on clusters fall to duplicate assignments, then dominators.
    mem[3].scores.num_clusters = 5;
    mem[3].beta = {7};
    mem[2].beta = {7};
    mem.push_back(with_scores(scores(0.79, 0.79, 0.0, 5), {7}));
    CHECK(worst_member(mem) == 4);
}

TEST_CASE("insertion replaces the first dominated member, else appends and evicts") {
    std::vector<Solution> mem;
    mem.push_back(with_scores(scores(0.8, 0.8, 0.0, 2)));
    mem.push_back(with_scores(scores(0.7, 0.9, 0.0, 2)));
    insert_in_memory(mem, with_scores(scores(0.85, 0.85, 0.0, 2)), 2);
    CHECK(mem.size() == 2);
    CHECK(mem[0].scores.grounding_coherence == 0.85);
    insert_in_memory(mem, with_scores(scores(0.6, 0.95, 0.0, 2)), 3);
    CHECK(mem.size() == 3);
    insert_in_memory(mem, with_scores(scores(0.5, 0.5, 0.0, 4)), 3);
    CHECK(mem.size() == 3);
}

TEST_CASE("mutation respects L_max and keeps every agent assigned") {
    Rng rng(9);
    const auto env = testutil::random_momdp(4, 2, 2, 4, rng);
    SvslConfig cfg;
    cfg.L_max = 3;
    for (int rep = 0; rep < 200; ++rep) {
        auto sol = random_solution(env, 6, cfg, rng);
        sol.scores = scores(0.5, 0.5, 0.0, 1);
        mutate_solution(sol, cfg.L_max, 0.5, 0.1, rng);
        CHECK(sol.beta.size() == 6);
        for (int b : sol.beta) {
            CHECK(b >= 0);
            CHECK(b < cfg.L_max);
        }
        CHECK(sol.keep_assignment);
    }
}

TEST_CASE("solutions round trip through JSON") {
    Rng rng(4);
    const auto env = testutil::random_momdp(4, 2, 2, 4, rng);
    SvslConfig cfg;
    cfg.L_max = 3;
    auto sol = random_solution(env, 5, cfg, rng);
    for (auto& p : sol.model.params()) p = standard_normal(rng);
    const auto j = sol.to_json();
    const auto back = Solution::from_json(env, j);
    CHECK(back.beta == sol.beta);
    CHECK(back.model.params() == sol.model.params());
    CHECK(back.bank.omega() == sol.bank.omega());
    CHECK(back.to_json() == j);
}

TEST_CASE("svsl config JSON round trip") {
    SvslConfig c;
    c.L_max = 7;
    c.A_ref = 0.85;
    c.model.mode = RewardModelMode::Mlp;
    c.model.hidden = {32, 16};
    const auto back = svsl_config_from_json(svsl_config_to_json(c));
    CHECK(back.L_max == 7);
    CHECK(back.A_ref == 0.85);
    CHECK(back.model.mode == RewardModelMode::Mlp);
    CHECK(back.model.hidden == std::vector<int>{32, 16});
    CHECK(svsl_config_to_json(back) == svsl_config_to_json(c));
}

TEST_CASE("svsl separates two opposed groups on a toy society") {
    Rng rng(42);
    const auto tg = two_groups(rng);
    SvslConfig cfg;
    cfg.L_max = 4;
    cfg.alpha_theta = 5e-2;
    cfg.alpha_omega = 5e-2;
    cfg.b_mp = 0;
    cfg.I = 30;
    cfg.N = 3;
    const auto res = run_svsl(tg.env, tg.train, cfg, rng);
    const auto& s = res.best.scores;
    MESSAGE("repr " << s.representativeness << " chr " << s.grounding_coherence << " L " << s.num_clusters);
    CHECK(s.representativeness >= 0.9);
    CHECK(s.grounding_coherence >= 0.85);
    CHECK(s.num_clusters >= 2);
    // Agents of the same group share a cluster.
    CHECK(res.best.beta[0] == res.best.beta[1]);
    CHECK(res.best.beta[3] == res.best.beta[4]);
    CHECK(res.best.beta[0] != res.best.beta[3]);
}

TEST_CASE("target mode stops early or reports the best solution") {
    Rng rng(7);
    const auto tg = two_groups(rng);
    SvslConfig cfg;
    cfg.L_max = 3;
    cfg.A_ref = 1.01;
    cfg.max_iterations = 3;
    cfg.N = 2;
    try {
        run_svsl(tg.env, tg.train, cfg, rng);
        FAIL("an unreachable target must throw");
    } catch (const SvslNotConverged& e) {
        CHECK(e.best.beta.size() == 6);
    }
}
