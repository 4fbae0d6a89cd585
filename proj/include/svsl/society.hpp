#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsl/environment.hpp"
#include "svsl/pareto.hpp"
#include "svsl/value_metrics.hpp"

namespace svsl {

struct SocietyConfig {
    int grid_points = 50;
    int agents_per_weight = 3;
    int trajectories_per_agent = 200;
    double rational_fraction = 0.8;
    double epsilon = 0.1;
    int pairs_per_kind = 200;
    double train_fraction = 0.5;
};

nlohmann::json society_config_to_json(const SocietyConfig& c);
SocietyConfig society_config_from_json(const nlohmann::json& j, SocietyConfig base = {});

/// A front weight with the policy that realizes it and its exact vector return.
struct FrontMember {
    Weights weight;
    TabularPolicy policy;
    std::vector<double> value;
};

/// Keeps one representative weight per distinct nondominated return: the lower
/// median of the grid weights that reach it. Members are ordered by the first
/// weight component.
std::vector<FrontMember> build_ground_truth_front(const std::vector<OracleSolution>& solutions);

struct SocietyAgent {
    int id = 0;
    int front_index = 0;
    Weights weight;
    std::vector<TrajectoryRef> pool;
};

struct Society {
    std::vector<FrontMember> front;
    std::vector<SocietyAgent> agents;
    RewardTable ground_truth;

    int num_agents() const { return static_cast<int>(agents.size()); }
    std::vector<Weights> agent_weights() const;
};

/// round(r_p * count) epsilon-greedy rollouts of `policy`, the rest uniformly random.
std::vector<TrajectoryRef> sample_agent_trajectories(const TabularMomdp& env, const TabularPolicy& policy,
                                                     double rational_fraction, double epsilon, int count,
                                                     std::uint64_t& next_id, Rng& rng);

/// Ground-truth labels of `weight` on (first, second): y_V from w . G, y_vi from G_i.
PreferenceRecord oracle_answer(int agent, std::span<const double> weight, const TrajectoryRef& first,
                               const TrajectoryRef& second, const RewardTable& ground_truth);

Society generate_society(const TabularMomdp& env, const SocietyConfig& cfg, Rng& rng);

struct SplitDataset {
    Dataset train;
    Dataset test;
};

/// Per agent and per kind (one per value plus the value-system kind), samples
/// `pairs_per_kind` pairs of distinct pool trajectories with replacement, labels
/// each with every oracle label, and splits each kind by `train_fraction`.
SplitDataset build_dataset(const Society& society, const SocietyConfig& cfg, Rng& rng);

/// Git-style blob SHA-1 of the environment dump.
std::string env_hash(const TabularMomdp& env);

/// JSON lines: a header object, then one record per line with inline trajectories.
void write_dataset_jsonl(std::ostream& os, const SplitDataset& data, const nlohmann::json& header);

struct LoadedDataset {
    nlohmann::json header;
    SplitDataset data;
};

/// Trajectories with identical steps are shared between records.
LoadedDataset read_dataset_jsonl(std::istream& is, const TabularMomdp& env);

}  // namespace svsl
