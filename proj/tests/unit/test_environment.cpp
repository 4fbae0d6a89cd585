#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "svsl/environment.hpp"

using namespace svsl;

namespace {

std::vector<std::vector<std::string>> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("firefighters dump matches the independent golden table") {
    const auto env = make_firefighters();
    std::ifstream golden_file(std::string(SVSL_TEST_DATA_DIR) + "/ff_golden.csv");
    REQUIRE(golden_file.good());
    const auto golden = read_csv(golden_file);
    std::istringstream mine_stream(env.dump());
    const auto mine = read_csv(mine_stream);

    REQUIRE(golden.size() == mine.size());
    REQUIRE(mine.size() == 1 + 400 * 5);
    CHECK(golden[0] == mine[0]);
    for (std::size_t k = 1; k < golden.size(); ++k) {
        REQUIRE(golden[k].size() == mine[k].size());
        for (std::size_t c = 0; c < golden[k].size(); ++c) {
            INFO("row " << k << " column " << c);
            CHECK(std::stod(golden[k][c]) == std::stod(mine[k][c]));
        }
    }
}

TEST_CASE("state encoding round trips over all 400 states") {
    for (int s = 0; s < kFfNumStates; ++s) {
        const auto st = FfState::decode(s);
        CHECK(st.valid());
        CHECK(st.encode() == s);
    }
    CHECK(FfState{3, 4, 0, 0, 3}.encode() == (((3 * 5 + 4) * 2 + 0) * 2 + 0) * 4 + 3);
    CHECK_FALSE(FfState{5, 0, 0, 0, 0}.valid());
}

TEST_CASE("incapacitation is terminal and pays -1 on every value") {
    const auto env = make_firefighters();
    for (int s = 0; s < kFfNumStates; ++s) {
        const auto st = FfState::decode(s);
        CHECK(env.terminal(s) == (st.ffc == 0 || (st.fire_intensity == 0 && st.occupancy == 0)));
        for (int a = 0; a < kFfNumActions; ++a) {
            const int ns = env.next_state(s, a);
            if (FfState::decode(ns).ffc == 0) {
                CHECK(env.reward(s, a)[0] == -1.0);
                CHECK(env.reward(s, a)[1] == -1.0);
            }
        }
    }
}

TEST_CASE("hand-checked firefighters transitions") {
    // Aggressive suppression at FI=3 without equipment costs condition.
    const auto next = ff_transition({3, 4, 0, 0, 3}, FfAction::AggressiveFireSuppression);
    CHECK(next == FfState{1, 4, 0, 0, 2});
    // Contain only lowers the fire by one.
    CHECK(ff_transition({2, 1, 1, 1, 2}, FfAction::ContainFire) == FfState{1, 1, 1, 1, 2});
    const auto r = ff_reward({2, 1, 1, 1, 2}, FfAction::ContainFire, {1, 1, 1, 1, 2});
    CHECK(r[0] == doctest::Approx(0.8));
    CHECK(r[1] == doctest::Approx(0.2));
}

TEST_CASE("cached discounted alignment equals the stepwise sum") {
    Rng rng(11);
    for (double gamma : {1.0, 0.9}) {
        const auto env = testutil::random_momdp(9, 3, 3, 12, rng, gamma);
        for (int rep = 0; rep < 50; ++rep) {
            const auto traj = testutil::random_steps(9, 3, 1 + static_cast<int>(uniform_index(rng, 12)), rng);
            const auto ref = make_trajectory_ref(1, traj, env.config());
            const auto cached = discounted_alignment(*ref, env.reward_table());
            const auto naive = testutil::naive_return(traj, env.reward_table(), 3, gamma);
            const auto ordered = discounted_alignment(traj, env.reward_table(), 3, gamma);
            for (int i = 0; i < 3; ++i) {
                CHECK(cached[static_cast<std::size_t>(i)] == doctest::Approx(naive[static_cast<std::size_t>(i)]).epsilon(1e-12));
                CHECK(ordered[static_cast<std::size_t>(i)] == doctest::Approx(naive[static_cast<std::size_t>(i)]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("permuted trajectories get bit-identical returns when undiscounted") {
    Rng rng(5);
    const auto env = testutil::random_momdp(6, 4, 2, 10, rng);
    auto traj = testutil::random_steps(6, 4, 9, rng);
    auto perm = traj;
    std::reverse(perm.steps.begin(), perm.steps.end());
    const auto a = discounted_alignment(*make_trajectory_ref(1, traj, env.config()), env.reward_table());
    const auto b = discounted_alignment(*make_trajectory_ref(2, perm, env.config()), env.reward_table());
    CHECK(a == b);
}

TEST_CASE("rollouts stop at terminal states or the horizon") {
    Rng rng(3);
    const auto env = make_firefighters();
    const Policy random = [&](int, int, Rng& r) { return static_cast<int>(uniform_index(r, kFfNumActions)); };
    for (int rep = 0; rep < 200; ++rep) {
        const auto t = rollout(env, random, rng);
        REQUIRE_FALSE(t.empty());
        CHECK(t.size() <= static_cast<std::size_t>(env.config().horizon));
        CHECK(t.steps.front().state == env.initial_state());
        for (std::size_t k = 0; k + 1 < t.size(); ++k) {
            CHECK_FALSE(env.terminal(env.next_state(t.steps[k].state, t.steps[k].action)));
            CHECK(env.next_state(t.steps[k].state, t.steps[k].action) == t.steps[k + 1].state);
        }
        const auto& last = t.steps.back();
        if (t.size() < static_cast<std::size_t>(env.config().horizon)) CHECK(env.terminal(env.next_state(last.state, last.action)));
    }
}

TEST_CASE("state fields label every component") {
    const auto f = ff_state_fields({3, 4, 0, 1, 2});
    REQUIRE(f.size() == 5);
    CHECK(f[0].first == "Fire");
    const auto env = make_firefighters();
    REQUIRE(env.state_fields);
    CHECK(env.state_fields(FfState{3, 4, 0, 1, 2}.encode()) == f);
}

TEST_CASE("config validation rejects impossible sizes") {
    MomdpConfig cfg;
    cfg.num_states = 0;
    cfg.num_actions = 2;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
