#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "svsl/society.hpp"

using namespace svsl;

namespace {

const Society& ff_society() {
    static const Society s = [] {
        const auto env = make_firefighters();
        Rng rng(0);
        return generate_society(env, SocietyConfig{}, rng);
    }();
    return s;
}

}  // namespace

TEST_CASE("firefighters society has three agents per distinct front return") {
    const auto& s = ff_society();
    CHECK(s.front.size() == 5);
    CHECK(s.num_agents() == 15);
    std::map<int, int> per_member;
    for (const auto& a : s.agents) {
        ++per_member[a.front_index];
        CHECK(a.pool.size() == 200);
        CHECK(a.weight == s.front[static_cast<std::size_t>(a.front_index)].weight);
    }
    for (const auto& [idx, n] : per_member) CHECK(n == 3);
    // Members are ordered by the first weight component.
    for (std::size_t k = 1; k < s.front.size(); ++k) CHECK(s.front[k - 1].weight < s.front[k].weight);
}

TEST_CASE("representative weight is the lower median of the weights reaching a return") {
    OracleSolution a{{0.1, 0.9}, {}, {1.0, 2.0}};
    OracleSolution b{{0.2, 0.8}, {}, {1.0, 2.0}};
    OracleSolution c{{0.3, 0.7}, {}, {1.0, 2.0}};
    OracleSolution d{{0.4, 0.6}, {}, {1.0, 2.0}};
    OracleSolution e{{0.9, 0.1}, {}, {3.0, 0.0}};
    auto front = build_ground_truth_front({a, b, c, d, e});
    REQUIRE(front.size() == 2);
    CHECK(front[0].weight == Weights{0.2, 0.8});
    CHECK(front[1].weight == Weights{0.9, 0.1});
    front = build_ground_truth_front({a, b, c, e});
    CHECK(front[0].weight == Weights{0.2, 0.8});
}

TEST_CASE("rational trajectories follow the policy when epsilon is zero") {
    const auto env = make_firefighters();
    const auto sol = dp_oracle_solutions(env, {{0.5, 0.5}}).front();
    Rng rng(1);
    std::uint64_t next = 1;
    const auto trajs = sample_agent_trajectories(env, sol.policy, 0.8, 0.0, 10, next, rng);
    CHECK(trajs.size() == 10);
    CHECK(next == 11);
    for (int k = 0; k < 8; ++k) {
        const auto& t = trajs[static_cast<std::size_t>(k)]->trajectory;
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.steps[i].action == sol.policy(t.steps[i].state, static_cast<int>(i)));
        const auto g = discounted_alignment(*trajs[static_cast<std::size_t>(k)], env.reward_table());
        CHECK(g[0] == doctest::Approx(sol.value[0]));
        CHECK(g[1] == doctest::Approx(sol.value[1]));
    }
}

TEST_CASE("dataset has the expected size, split and oracle labels") {
    const auto& s = ff_society();
    Rng rng(2);
    const SocietyConfig cfg;
    const auto data = build_dataset(s, cfg, rng);
    CHECK(data.train.size() == 15 * 3 * 100);
    CHECK(data.test.size() == 15 * 3 * 100);
    for (int j = 0; j < 15; ++j) {
        const auto& w = s.agents[static_cast<std::size_t>(j)].weight;
        for (const auto& r : data.train.agent_records(j)) {
            CHECK(r.first != r.second);
            const auto ga = testutil::naive_return(r.first->trajectory, s.ground_truth, kFfNumActions, 1.0);
            const auto gb = testutil::naive_return(r.second->trajectory, s.ground_truth, kFfNumActions, 1.0);
            CHECK(r.values[0] == testutil::naive_label(ga[0], gb[0]));
            CHECK(r.values[1] == testutil::naive_label(ga[1], gb[1]));
            CHECK(r.value_system == testutil::naive_label(w[0] * ga[0] + w[1] * ga[1], w[0] * gb[0] + w[1] * gb[1]));
        }
    }
}

TEST_CASE("society generation is reproducible from the seed") {
    const auto env = make_firefighters();
    Rng a(5), b(5);
    const auto s1 = generate_society(env, SocietyConfig{}, a);
    const auto s2 = generate_society(env, SocietyConfig{}, b);
    REQUIRE(s1.num_agents() == s2.num_agents());
    for (int j = 0; j < s1.num_agents(); ++j)
        for (std::size_t k = 0; k < 200; ++k)
            CHECK(s1.agents[static_cast<std::size_t>(j)].pool[k]->trajectory == s2.agents[static_cast<std::size_t>(j)].pool[k]->trajectory);
}

TEST_CASE("dataset JSONL round trip preserves records and shares trajectories") {
    const auto env = make_firefighters();
    const auto& s = ff_society();
    Rng rng(3);
    SocietyConfig cfg;
    cfg.pairs_per_kind = 20;
    const auto data = build_dataset(s, cfg, rng);
    std::stringstream ss;
    write_dataset_jsonl(ss, data, {{"seed", 3}});
    const auto loaded = read_dataset_jsonl(ss, env);
    CHECK(loaded.header.at("seed") == 3);
    for (const auto* pair : {&data.train, &data.test}) {
        const auto& back = pair == &data.train ? loaded.data.train : loaded.data.test;
        REQUIRE(back.num_agents() == pair->num_agents());
        for (int j = 0; j < back.num_agents(); ++j) {
            const auto a = pair->agent_records(j);
            const auto b = back.agent_records(j);
            REQUIRE(a.size() == b.size());
            for (std::size_t k = 0; k < a.size(); ++k) {
                CHECK(a[k].first->trajectory == b[k].first->trajectory);
                CHECK(a[k].second->trajectory == b[k].second->trajectory);
                CHECK(a[k].value_system == b[k].value_system);
                CHECK(a[k].values == b[k].values);
            }
        }
    }
    // Identical trajectories load as one shared object.
    std::map<std::vector<std::pair<int, int>>, std::set<const TrajectoryData*>> by_steps;
    for (int j = 0; j < loaded.data.train.num_agents(); ++j)
        for (const auto& r : loaded.data.train.agent_records(j)) {
            std::vector<std::pair<int, int>> key;
            for (const auto& st : r.first->trajectory.steps) key.push_back({st.state, st.action});
            by_steps[key].insert(r.first.get());
        }
    for (const auto& [k, ptrs] : by_steps) CHECK(ptrs.size() == 1);
}

TEST_CASE("malformed dataset lines are rejected") {
    const auto env = make_firefighters();
    std::stringstream bad("{\"header\":true}\n{\"agent\":0,\"first\":[[0,9]]}\n");
    CHECK_THROWS(read_dataset_jsonl(bad, env));
}

TEST_CASE("environment hash is a stable 40-digit SHA-1 that tracks the tables") {
    const auto h = env_hash(make_firefighters());
    CHECK(h.size() == 40);
    CHECK(h == env_hash(make_firefighters()));
    FfOptions alt;
    alt.fi5_means_severe = true;
    CHECK(env_hash(make_firefighters(alt)) != h);
}

TEST_CASE("society config JSON round trip") {
    SocietyConfig c;
    c.agents_per_weight = 4;
    c.epsilon = 0.2;
    const auto back = society_config_from_json(society_config_to_json(c));
    CHECK(back.agents_per_weight == 4);
    CHECK(back.epsilon == 0.2);
    CHECK(society_config_to_json(back) == society_config_to_json(c));
}
