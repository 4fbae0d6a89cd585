#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svsl/common.hpp"

namespace svsl {

struct MomdpConfig {
    int num_values = 2;
    double discount = 1.0;
    int horizon = 50;
    int num_states = 0;
    int num_actions = 0;

    int num_state_actions() const { return num_states * num_actions; }
    void validate() const;
};

struct Step {
    int state = 0;
    int action = 0;
    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
    bool operator==(const Trajectory&) const = default;
};

/// Dense (state-action) x value table, row-major: at(sa, i) = values[sa*m + i].
struct RewardTable {
    int num_state_actions = 0;
    int num_values = 0;
    std::vector<double> values;

    RewardTable() = default;
    RewardTable(int num_sa, int m) : num_state_actions(num_sa), num_values(m), values(static_cast<std::size_t>(num_sa) * m, 0.0) {}

    double& at(int sa, int i) { return values[static_cast<std::size_t>(sa) * num_values + i]; }
    double at(int sa, int i) const { return values[static_cast<std::size_t>(sa) * num_values + i]; }
    std::span<const double> row(int sa) const {
        return {values.data() + static_cast<std::size_t>(sa) * num_values, static_cast<std::size_t>(num_values)};
    }
};

/// Discount-weighted occurrence of one state-action pair within a trajectory.
struct SaWeight {
    int sa = 0;
    double weight = 0.0;
};

/// Immutable trajectory with its precomputed discounted state-action
/// occurrence weights (sorted by state-action index). Returns under any
/// reward table are a dot product over these weights, so two trajectories
/// with the same multiset of steps get bit-identical returns.
struct TrajectoryData {
    std::uint64_t id = 0;
    Trajectory trajectory;
    std::vector<SaWeight> features;
};

using TrajectoryRef = std::shared_ptr<const TrajectoryData>;

TrajectoryRef make_trajectory_ref(std::uint64_t id, Trajectory traj, const MomdpConfig& cfg);

/// G(tau) = sum_t gamma^t R(s_t, a_t), componentwise.
std::vector<double> discounted_alignment(const TrajectoryData& traj, const RewardTable& rewards);
void discounted_alignment(const TrajectoryData& traj, const RewardTable& rewards, std::span<double> out);

/// Reference evaluation stepping through the trajectory in order.
std::vector<double> discounted_alignment(const Trajectory& traj, const RewardTable& rewards,
                                         int num_actions, double gamma);

/// Finite deterministic multi-objective MDP given by lookup tables.
class TabularMomdp {
public:
    TabularMomdp(MomdpConfig cfg, std::vector<int> next_state, RewardTable rewards,
                 std::vector<bool> terminal, int initial_state);

    const MomdpConfig& config() const { return cfg_; }
    int num_values() const { return cfg_.num_values; }
    int num_states() const { return cfg_.num_states; }
    int num_actions() const { return cfg_.num_actions; }
    int sa_index(int s, int a) const { return s * cfg_.num_actions + a; }

    int next_state(int s, int a) const { return next_state_[static_cast<std::size_t>(sa_index(s, a))]; }
    std::span<const double> reward(int s, int a) const { return rewards_.row(sa_index(s, a)); }
    const RewardTable& reward_table() const { return rewards_; }
    bool terminal(int s) const { return terminal_[static_cast<std::size_t>(s)]; }
    int initial_state() const { return initial_state_; }

    /// Categorical state features used by factored one-hot encoders.
    /// Defaults to a single feature equal to the state index.
    const std::vector<int>& feature_cardinalities() const { return feature_cardinalities_; }
    const std::vector<int>& state_features(int s) const { return state_features_[static_cast<std::size_t>(s)]; }
    void set_state_features(std::vector<int> cardinalities, std::vector<std::vector<int>> features);

    /// Names for rendering trajectories to humans.
    std::function<std::string(int)> describe_state;
    std::function<std::string(int)> describe_action;
    /// Named, human-readable state fields; empty when the environment has none.
    std::function<std::vector<std::pair<std::string, std::string>>(int)> state_fields;
    std::vector<std::string> value_names;

    /// CSV dump: state_index,action_index,next_state_index,r_1..r_m,terminal_flag.
    void write_dump(std::ostream& os) const;
    std::string dump() const;

private:
    MomdpConfig cfg_;
    std::vector<int> next_state_;
    RewardTable rewards_;
    std::vector<bool> terminal_;
    int initial_state_;
    std::vector<int> feature_cardinalities_;
    std::vector<std::vector<int>> state_features_;
};

/// Policy maps (state, timestep) to an action; it may draw from the rng.
using Policy = std::function<int(int state, int t, Rng& rng)>;

/// Runs from `start` until a terminal state is entered or the horizon is hit.
Trajectory rollout(const TabularMomdp& env, const Policy& policy, Rng& rng, int start);
Trajectory rollout(const TabularMomdp& env, const Policy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// Firefighters
// ---------------------------------------------------------------------------

enum class FfAction : int {
    EvacuateOccupants = 0,
    ContainFire = 1,
    AggressiveFireSuppression = 2,
    PrepareEquipment = 3,
    UpdateKnowledge = 4,
};

inline constexpr int kFfNumStates = 400;
inline constexpr int kFfNumActions = 5;

struct FfState {
    int fire_intensity = 0;  // 0..4, None..Severe
    int occupancy = 0;       // 0..4
    int equipment = 0;       // 0..1
    int knowledge = 0;       // 0..1
    int ffc = 0;             // firefighter condition 0..3 (0 = incapacitated)

    int encode() const;
    static FfState decode(int index);
    bool valid() const;
    bool operator==(const FfState&) const = default;
};

struct FfOptions {
    FfState initial{3, 4, 0, 0, 3};
    /// Reads the unreachable "FI = 5" equipment-loss rows as FI = 4.
    bool fi5_means_severe = false;
    int horizon = 50;
};

FfState ff_transition(const FfState& s, FfAction a, bool fi5_means_severe = false);
std::array<double, 2> ff_reward(const FfState& s, FfAction a, const FfState& next);
bool ff_terminal(const FfState& s);

std::string ff_action_name(FfAction a);
std::string ff_state_description(const FfState& s);
/// (field name, value label) pairs in display order.
std::vector<std::pair<std::string, std::string>> ff_state_fields(const FfState& s);

TabularMomdp make_firefighters(const FfOptions& opts = {});

}  // namespace svsl
