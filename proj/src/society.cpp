#include "svsl/society.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <openssl/sha.h>

namespace svsl {

nlohmann::json society_config_to_json(const SocietyConfig& c) {
    return {{"grid_points", c.grid_points},
            {"agents_per_weight", c.agents_per_weight},
            {"trajectories_per_agent", c.trajectories_per_agent},
            {"rational_fraction", c.rational_fraction},
            {"epsilon", c.epsilon},
            {"pairs_per_kind", c.pairs_per_kind},
            {"train_fraction", c.train_fraction}};
}

SocietyConfig society_config_from_json(const nlohmann::json& j, SocietyConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("grid_points", c.grid_points);
    get("agents_per_weight", c.agents_per_weight);
    get("trajectories_per_agent", c.trajectories_per_agent);
    get("rational_fraction", c.rational_fraction);
    get("epsilon", c.epsilon);
    get("pairs_per_kind", c.pairs_per_kind);
    get("train_fraction", c.train_fraction);
    return c;
}

std::vector<FrontMember> build_ground_truth_front(const std::vector<OracleSolution>& solutions) {
    std::vector<FrontPoint> pts;
    for (const auto& s : solutions) pts.push_back({s.value, {s.weight}});
    const Front front = pareto_filter(pts);
    std::vector<FrontMember> out;
    for (const auto& p : front.points) {
        std::vector<Weights> ws = p.weights;
        std::sort(ws.begin(), ws.end());
        const Weights& rep = ws[(ws.size() - 1) / 2];
        const auto it = std::find_if(solutions.begin(), solutions.end(), [&](const OracleSolution& s) { return s.weight == rep; });
        out.push_back({rep, it->policy, it->value});
    }
    std::sort(out.begin(), out.end(), [](const FrontMember& a, const FrontMember& b) { return a.weight < b.weight; });
    return out;
}

std::vector<Weights> Society::agent_weights() const {
    std::vector<Weights> out;
    for (const auto& a : agents) out.push_back(a.weight);
    return out;
}

std::vector<TrajectoryRef> sample_agent_trajectories(const TabularMomdp& env, const TabularPolicy& policy,
                                                     double rational_fraction, double epsilon, int count,
                                                     std::uint64_t& next_id, Rng& rng) {
    const int rational = static_cast<int>(std::lround(rational_fraction * count));
    const int A = env.num_actions();
    std::vector<TrajectoryRef> out;
    for (int k = 0; k < count; ++k) {
        Trajectory traj;
        if (k < rational) {
            traj = rollout(env, [&](int s, int t, Rng& r) {
                if (epsilon > 0.0 && uniform01(r) < epsilon) return static_cast<int>(uniform_index(r, A));
                return policy(s, t);
            }, rng);
        } else {
            traj = rollout(env, [&](int, int, Rng& r) { return static_cast<int>(uniform_index(r, A)); }, rng);
        }
        out.push_back(make_trajectory_ref(next_id++, std::move(traj), env.config()));
    }
    return out;
}

PreferenceRecord oracle_answer(int agent, std::span<const double> weight, const TrajectoryRef& first,
                               const TrajectoryRef& second, const RewardTable& ground_truth) {
    const auto ga = discounted_alignment(*first, ground_truth);
    const auto gb = discounted_alignment(*second, ground_truth);
    PreferenceRecord r;
    r.first = first;
    r.second = second;
    r.agent = agent;
    r.value_system = qualitative_label(dot(weight, ga), dot(weight, gb));
    for (std::size_t i = 0; i < ga.size(); ++i) r.values.push_back(qualitative_label(ga[i], gb[i]));
    return r;
}

Society generate_society(const TabularMomdp& env, const SocietyConfig& cfg, Rng& rng) {
    Society soc;
    soc.ground_truth = env.reward_table();
    soc.front = build_ground_truth_front(dp_oracle_solutions(env, equally_spaced_weights(env.num_values(), cfg.grid_points)));
    std::uint64_t next_id = 0;
    int id = 0;
    for (std::size_t f = 0; f < soc.front.size(); ++f) {
        for (int k = 0; k < cfg.agents_per_weight; ++k) {
            SocietyAgent a;
            a.id = id++;
            a.front_index = static_cast<int>(f);
            a.weight = soc.front[f].weight;
            a.pool = sample_agent_trajectories(env, soc.front[f].policy, cfg.rational_fraction, cfg.epsilon,
                                               cfg.trajectories_per_agent, next_id, rng);
            soc.agents.push_back(std::move(a));
        }
    }
    return soc;
}

SplitDataset build_dataset(const Society& society, const SocietyConfig& cfg, Rng& rng) {
    const int m = society.ground_truth.num_values;
    SplitDataset out{Dataset(society.num_agents(), m), Dataset(society.num_agents(), m)};
    const int n_train = static_cast<int>(std::lround(cfg.train_fraction * cfg.pairs_per_kind));
    for (const auto& agent : society.agents) {
        const std::size_t n = agent.pool.size();
        if (n < 2) log::warn("agent " + std::to_string(agent.id) + " has fewer than two trajectories; pairs repeat");
        for (int kind = 0; kind <= m; ++kind) {
            for (int k = 0; k < cfg.pairs_per_kind; ++k) {
                const std::size_t i = uniform_index(rng, n);
                std::size_t j = i;
                if (n >= 2) {
                    j = uniform_index(rng, n - 1);
                    if (j >= i) ++j;
                }
                auto rec = oracle_answer(agent.id, agent.weight, agent.pool[i], agent.pool[j], society.ground_truth);
                (k < n_train ? out.train : out.test).add(std::move(rec));
            }
        }
    }
    return out;
}

std::string env_hash(const TabularMomdp& env) {
    const std::string body = env.dump();
    const std::string blob = "blob " + std::to_string(body.size()) + '\0' + body;
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
    std::ostringstream os;
    for (unsigned char c : digest) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
    return os.str();
}

namespace {

nlohmann::json steps_json(const Trajectory& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Step& s : t.steps) arr.push_back({s.state, s.action});
    return arr;
}

nlohmann::json record_json(const PreferenceRecord& r, const char* split) {
    nlohmann::json y = nlohmann::json::array();
    for (Preference p : r.values) y.push_back(to_value(p));
    return {{"agent", r.agent},
            {"split", split},
            {"first", steps_json(r.first->trajectory)},
            {"second", steps_json(r.second->trajectory)},
            {"y_vs", to_value(r.value_system)},
            {"y_values", y}};
}

}  // namespace

void write_dataset_jsonl(std::ostream& os, const SplitDataset& data, const nlohmann::json& header) {
    nlohmann::json h = header;
    h["type"] = "header";
    h["num_agents"] = data.train.num_agents();
    h["num_values"] = data.train.num_values();
    os << h.dump() << '\n';
    for (int j = 0; j < data.train.num_agents(); ++j) {
        for (const auto& r : data.train.agent_records(j)) os << record_json(r, "train").dump() << '\n';
        for (const auto& r : data.test.agent_records(j)) os << record_json(r, "test").dump() << '\n';
    }
}

LoadedDataset read_dataset_jsonl(std::istream& is, const TabularMomdp& env) {
    LoadedDataset out;
    std::string line;
    if (!std::getline(is, line)) throw Error("dataset file is empty");
    out.header = nlohmann::json::parse(line);
    const int n_agents = out.header.at("num_agents").get<int>();
    const int m = out.header.at("num_values").get<int>();
    if (m != env.num_values()) throw Error("dataset value count does not match the environment");
    out.data = {Dataset(n_agents, m), Dataset(n_agents, m)};
    std::map<std::vector<std::pair<int, int>>, TrajectoryRef> interned;
    std::uint64_t next_id = 0;
    auto intern = [&](const nlohmann::json& arr) {
        std::vector<std::pair<int, int>> key;
        for (const auto& st : arr) key.emplace_back(st.at(0).get<int>(), st.at(1).get<int>());
        auto it = interned.find(key);
        if (it != interned.end()) return it->second;
        Trajectory t;
        for (const auto& [s, a] : key) {
            if (s < 0 || s >= env.num_states() || a < 0 || a >= env.num_actions())
                throw Error("dataset trajectory step outside the environment");
            t.steps.push_back({s, a});
        }
        auto ref = make_trajectory_ref(next_id++, std::move(t), env.config());
        interned.emplace(std::move(key), ref);
        return ref;
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        PreferenceRecord r;
        r.agent = j.at("agent").get<int>();
        r.first = intern(j.at("first"));
        r.second = intern(j.at("second"));
        r.value_system = preference_from_value(j.at("y_vs").get<double>());
        for (const auto& y : j.at("y_values")) r.values.push_back(preference_from_value(y.get<double>()));
        const std::string split = j.at("split").get<std::string>();
        if (split == "train")
            out.data.train.add(std::move(r));
        else if (split == "test")
            out.data.test.add(std::move(r));
        else
            throw Error("unknown dataset split: " + split);
    }
    return out;
}

}  // namespace svsl
