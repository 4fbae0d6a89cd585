#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "svsl/value_metrics.hpp"

using namespace svsl;
using namespace oracle;

TEST_CASE("society metrics agree with brute-force references on 200 random instances") {
    Rng rng(2024);
    int ties_seen = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const auto in = random_instance(rng);
        const auto scores = score_society(in.beta, in.weights, in.grounding, in.data);
        for (int i = 0; i < in.m; ++i) CHECK(scores.coherence[static_cast<std::size_t>(i)] == doctest::Approx(ref_coherence(in, i)).epsilon(1e-12));
        const double repr = ref_repr(in);
        bool single = false;
        const double conc = ref_conc(in, &single);
        CHECK(scores.representativeness == doctest::Approx(repr).epsilon(1e-12));
        CHECK(scores.single_cluster == single);
        CHECK(scores.conciseness == doctest::Approx(conc).epsilon(1e-12));
        CHECK(scores.gamma == doctest::Approx((1.0 - repr) / (1.0 + conc)).epsilon(1e-12));
        CHECK(scores.num_clusters == static_cast<int>(std::set<int>(in.beta.begin(), in.beta.end()).size()));
        for (int j = 0; j < in.agents; ++j)
            for (const auto& r : in.data.agent_records(j))
                if (value_system_label(r, in.grounding, in.weights[0]) == Preference::Indifferent) ++ties_seen;
    }
    // The instances are meant to exercise the indifference branch.
    CHECK(ties_seen > 50);
}

TEST_CASE("metrics stay in range and coherence is 1 under the labelling grounding") {
    Rng rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        auto in = random_instance(rng);
        // Relabel every record with the instance's own grounding.
        Dataset relabeled(in.agents, in.m);
        for (int j = 0; j < in.agents; ++j)
            for (auto r : in.data.agent_records(j)) {
                for (int i = 0; i < in.m; ++i) r.values[static_cast<std::size_t>(i)] = grounding_label(r, in.grounding, i);
                r.value_system = value_system_label(r, in.grounding, in.weights[static_cast<std::size_t>(in.beta[static_cast<std::size_t>(j)])]);
                relabeled.add(r);
            }
        const auto s = score_society(in.beta, in.weights, in.grounding, relabeled);
        for (double c : s.coherence) CHECK(c == 1.0);
        CHECK(s.representativeness == 1.0);
        CHECK(s.gamma == 0.0);
        CHECK(s.conciseness >= 0.0);
        CHECK(s.conciseness <= 1.0);
    }
}

TEST_CASE("discordance basics") {
    const std::vector<Preference> a{Preference::First, Preference::Second, Preference::Indifferent, Preference::First};
    const std::vector<Preference> b{Preference::First, Preference::Indifferent, Preference::Indifferent, Preference::Second};
    CHECK(discordance(a, a) == 0.0);
    CHECK(discordance(a, b) == 0.5);
    CHECK(discordance(a, b) == discordance(b, a));
    CHECK_THROWS_AS(discordance(std::vector<Preference>{}, std::vector<Preference>{}), Error);
}

TEST_CASE("Bradley-Terry probability is overflow safe and symmetric") {
    CHECK(bt_probability(0.0, 0.0) == 0.5);
    CHECK(bt_probability(1.0, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(bt_probability(1e4, 0.0) == 1.0);
    CHECK(bt_probability(0.0, 1e4) == 0.0);
    CHECK(std::isfinite(bt_probability(-1e308, 1e308)));
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const double a = standard_normal(rng) * 30, b = standard_normal(rng) * 30;
        CHECK(bt_probability(a, b) + bt_probability(b, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("label tolerance and conversions") {
    CHECK(qualitative_label(1.0, 1.0 + 5e-7) == Preference::Indifferent);
    CHECK(qualitative_label(1.0, 1.0 + 2e-6) == Preference::Second);
    CHECK(qualitative_label(2.0, 1.0) == Preference::First);
    CHECK(preference_from_value(0.5) == Preference::Indifferent);
    CHECK(to_value(Preference::First) == 1.0);
    CHECK(flip(Preference::First) == Preference::Second);
    CHECK_THROWS_AS(preference_from_value(0.7), Error);
}

TEST_CASE("empty agents and unassigned agents are errors") {
    Dataset d(2, 2);
    RewardTable g(4, 2);
    CHECK_THROWS_AS(coherence(g, d, 0), Error);
    Rng rng(4);
    const auto full = testutil::random_dataset(2, 3, 2, 2, 2, rng);
    CHECK_THROWS_AS(representativeness({0}, {{0.5, 0.5}}, g, full), Error);
    CHECK_THROWS_AS(representativeness({0, 3}, {{0.5, 0.5}}, g, full), Error);
}

TEST_CASE("a single live cluster reports conciseness 0") {
    Rng rng(8);
    const auto d = testutil::random_dataset(3, 4, 3, 2, 2, rng);
    RewardTable g(6, 2);
    const auto s = score_society({1, 1, 1}, {{0.2, 0.8}, {0.5, 0.5}}, g, d);
    CHECK(s.single_cluster);
    CHECK(s.conciseness == 0.0);
    CHECK(s.gamma == doctest::Approx(1.0 - s.representativeness));
}
