#include "svsl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace svsl {

void MomdpConfig::validate() const {
    if (num_values < 2) throw Error("MOMDP needs at least two values");
    if (!(discount > 0.0 && discount <= 1.0)) throw Error("discount must lie in (0, 1]");
    if (horizon < 1) throw Error("horizon must be positive");
    if (num_states < 1 || num_actions < 1) throw Error("empty state or action space");
}

TrajectoryRef make_trajectory_ref(std::uint64_t id, Trajectory traj, const MomdpConfig& cfg) {
    auto data = std::make_shared<TrajectoryData>();
    data->id = id;
    std::map<int, double> acc;
    double g = 1.0;
    for (const Step& st : traj.steps) {
        acc[st.state * cfg.num_actions + st.action] += g;
        g *= cfg.discount;
    }
    data->features.reserve(acc.size());
    for (const auto& [sa, w] : acc) data->features.push_back({sa, w});
    data->trajectory = std::move(traj);
    return data;
}

void discounted_alignment(const TrajectoryData& traj, const RewardTable& rewards, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const int m = rewards.num_values;
    for (const SaWeight& f : traj.features) {
        const double* r = rewards.values.data() + static_cast<std::size_t>(f.sa) * m;
        for (int i = 0; i < m; ++i) out[i] += f.weight * r[i];
    }
}

std::vector<double> discounted_alignment(const TrajectoryData& traj, const RewardTable& rewards) {
    std::vector<double> out(static_cast<std::size_t>(rewards.num_values));
    discounted_alignment(traj, rewards, out);
    return out;
}

std::vector<double> discounted_alignment(const Trajectory& traj, const RewardTable& rewards,
                                         int num_actions, double gamma) {
    std::vector<double> out(static_cast<std::size_t>(rewards.num_values), 0.0);
    double g = 1.0;
    for (const Step& st : traj.steps) {
        const auto r = rewards.row(st.state * num_actions + st.action);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * r[i];
        g *= gamma;
    }
    return out;
}

TabularMomdp::TabularMomdp(MomdpConfig cfg, std::vector<int> next_state, RewardTable rewards,
                           std::vector<bool> terminal, int initial_state)
    : cfg_(cfg),
      next_state_(std::move(next_state)),
      rewards_(std::move(rewards)),
      terminal_(std::move(terminal)),
      initial_state_(initial_state) {
    cfg_.validate();
    const auto nsa = static_cast<std::size_t>(cfg_.num_state_actions());
    if (next_state_.size() != nsa || rewards_.num_state_actions != cfg_.num_state_actions() ||
        rewards_.num_values != cfg_.num_values || terminal_.size() != static_cast<std::size_t>(cfg_.num_states))
        throw Error("TabularMomdp: table shapes do not match the configuration");
    if (initial_state_ < 0 || initial_state_ >= cfg_.num_states) throw Error("TabularMomdp: bad initial state");
    feature_cardinalities_ = {cfg_.num_states};
    state_features_.resize(static_cast<std::size_t>(cfg_.num_states));
    for (int s = 0; s < cfg_.num_states; ++s) state_features_[static_cast<std::size_t>(s)] = {s};
    describe_state = [](int s) { return "state " + std::to_string(s); };
    describe_action = [](int a) { return "action " + std::to_string(a); };
    for (int i = 0; i < cfg_.num_values; ++i) value_names.push_back("v" + std::to_string(i + 1));
}

void TabularMomdp::set_state_features(std::vector<int> cardinalities, std::vector<std::vector<int>> features) {
    if (features.size() != static_cast<std::size_t>(cfg_.num_states)) throw Error("state feature table size mismatch");
    for (const auto& f : features) {
        if (f.size() != cardinalities.size()) throw Error("state feature arity mismatch");
        for (std::size_t k = 0; k < f.size(); ++k)
            if (f[k] < 0 || f[k] >= cardinalities[k]) throw Error("state feature out of range");
    }
    feature_cardinalities_ = std::move(cardinalities);
    state_features_ = std::move(features);
}

void TabularMomdp::write_dump(std::ostream& os) const {
    os << "state_index,action_index,next_state_index";
    for (const auto& name : value_names) os << ",r_" << name;
    os << ",terminal_flag\n";
    char buf[64];
    for (int s = 0; s < cfg_.num_states; ++s) {
        for (int a = 0; a < cfg_.num_actions; ++a) {
            const int ns = next_state(s, a);
            os << s << ',' << a << ',' << ns;
            for (double r : reward(s, a)) {
                std::snprintf(buf, sizeof buf, "%.17g", r);
                os << ',' << buf;
            }
            os << ',' << (terminal(ns) ? 1 : 0) << '\n';
        }
    }
}

std::string TabularMomdp::dump() const {
    std::ostringstream os;
    write_dump(os);
    return os.str();
}

Trajectory rollout(const TabularMomdp& env, const Policy& policy, Rng& rng, int start) {
    Trajectory traj;
    int s = start;
    const int horizon = env.config().horizon;
    for (int t = 0; t < horizon; ++t) {
        const int a = policy(s, t, rng);
        if (a < 0 || a >= env.num_actions()) throw Error("policy returned an invalid action");
        traj.steps.push_back({s, a});
        s = env.next_state(s, a);
        if (env.terminal(s)) break;
    }
    return traj;
}

Trajectory rollout(const TabularMomdp& env, const Policy& policy, Rng& rng) {
    return rollout(env, policy, rng, env.initial_state());
}

// ---------------------------------------------------------------------------
// Firefighters

int FfState::encode() const {
    return (((fire_intensity * 5 + occupancy) * 2 + equipment) * 2 + knowledge) * 4 + ffc;
}

FfState FfState::decode(int index) {
    if (index < 0 || index >= kFfNumStates) throw Error("FF state index out of range");
    FfState s;
    s.ffc = index % 4;
    index /= 4;
    s.knowledge = index % 2;
    index /= 2;
    s.equipment = index % 2;
    index /= 2;
    s.occupancy = index % 5;
    s.fire_intensity = index / 5;
    return s;
}

bool FfState::valid() const {
    return fire_intensity >= 0 && fire_intensity <= 4 && occupancy >= 0 && occupancy <= 4 && equipment >= 0 &&
           equipment <= 1 && knowledge >= 0 && knowledge <= 1 && ffc >= 0 && ffc <= 3;
}

FfState ff_transition(const FfState& s, FfAction a, bool fi5_means_severe) {
    const int equipment_loss_level = fi5_means_severe ? 4 : 5;
    FfState n = s;
    switch (a) {
        case FfAction::EvacuateOccupants:
            n.occupancy = std::max(0, s.occupancy - 1);
            if (s.fire_intensity >= 3 && s.equipment == 0 && s.knowledge == 0) n.ffc = std::max(0, s.ffc - 1);
            if (s.fire_intensity == equipment_loss_level) n.equipment = 0;
            break;
        case FfAction::ContainFire:
            n.fire_intensity = std::max(0, s.fire_intensity - 1);
            break;
        case FfAction::AggressiveFireSuppression:
            n.fire_intensity = std::max(0, s.fire_intensity - 2);
            if (s.fire_intensity >= 3 && (s.equipment == 0 || s.knowledge == 0)) n.ffc = std::max(0, s.ffc - 1);
            if (s.fire_intensity == equipment_loss_level) n.equipment = 0;
            break;
        case FfAction::PrepareEquipment:
            n.equipment = 1;
            break;
        case FfAction::UpdateKnowledge:
            n.knowledge = 1;
            break;
    }
    return n;
}

std::array<double, 2> ff_reward(const FfState& s, FfAction a, const FfState& next) {
    constexpr std::array<double, 2> kFail{-1.0, -1.0};
    if (next.ffc == 0) return kFail;
    switch (a) {
        case FfAction::EvacuateOccupants:
            if (s.occupancy == 0) return kFail;
            return {1.0 - 0.2 * s.fire_intensity - 0.1 * s.knowledge, 1.0};
        case FfAction::ContainFire:
            if (s.fire_intensity == 0) return kFail;
            return {0.8, 0.2};
        case FfAction::AggressiveFireSuppression:
            if (s.fire_intensity == 0) return kFail;
            return s.equipment == 0 ? std::array<double, 2>{0.3, 0.7} : std::array<double, 2>{0.6, 0.7};
        case FfAction::PrepareEquipment:
            return s.equipment == 0 ? std::array<double, 2>{0.5, -0.1} : kFail;
        case FfAction::UpdateKnowledge:
            return s.knowledge == 0 ? std::array<double, 2>{1.0, -0.5} : kFail;
    }
    return kFail;
}

bool ff_terminal(const FfState& s) {
    return (s.fire_intensity == 0 && s.occupancy == 0) || s.ffc == 0;
}

std::string ff_action_name(FfAction a) {
    switch (a) {
        case FfAction::EvacuateOccupants: return "Evacuate Occupants";
        case FfAction::ContainFire: return "Contain Fire";
        case FfAction::AggressiveFireSuppression: return "Aggressive Fire Suppression";
        case FfAction::PrepareEquipment: return "Prepare Equipment";
        case FfAction::UpdateKnowledge: return "Update Knowledge";
    }
    return "?";
}

std::vector<std::pair<std::string, std::string>> ff_state_fields(const FfState& s) {
    static const char* fire[] = {"None", "Low", "Moderate", "High", "Severe"};
    static const char* condition[] = {"Incapacitated", "Moderately Injured", "Slightly Injured", "Perfect Health"};
    return {{"Fire", fire[s.fire_intensity]},
            {"Occupancy", std::to_string(s.occupancy)},
            {"Equipment", s.equipment ? "Ready" : "Not Ready"},
            {"Knowledge", s.knowledge ? "Good" : "Poor"},
            {"Firefighter", condition[s.ffc]}};
}

std::string ff_state_description(const FfState& s) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [name, value] : ff_state_fields(s)) {
        os << (first ? "" : "; ") << name << ": " << value;
        first = false;
    }
    return os.str();
}

TabularMomdp make_firefighters(const FfOptions& opts) {
    if (!opts.initial.valid()) throw Error("invalid FF initial state");
    MomdpConfig cfg;
    cfg.num_values = 2;
    cfg.discount = 1.0;
    cfg.horizon = opts.horizon;
    cfg.num_states = kFfNumStates;
    cfg.num_actions = kFfNumActions;

    std::vector<int> next(static_cast<std::size_t>(cfg.num_state_actions()));
    RewardTable rewards(cfg.num_state_actions(), 2);
    std::vector<bool> terminal(kFfNumStates);
    std::vector<std::vector<int>> features(kFfNumStates);
    for (int si = 0; si < kFfNumStates; ++si) {
        const FfState s = FfState::decode(si);
        terminal[static_cast<std::size_t>(si)] = ff_terminal(s);
        features[static_cast<std::size_t>(si)] = {s.fire_intensity, s.occupancy, s.equipment, s.knowledge, s.ffc};
        for (int a = 0; a < kFfNumActions; ++a) {
            const auto act = static_cast<FfAction>(a);
            const FfState n = ff_transition(s, act, opts.fi5_means_severe);
            const int sa = si * kFfNumActions + a;
            next[static_cast<std::size_t>(sa)] = n.encode();
            const auto r = ff_reward(s, act, n);
            rewards.at(sa, 0) = r[0];
            rewards.at(sa, 1) = r[1];
        }
    }
    TabularMomdp env(cfg, std::move(next), std::move(rewards), std::move(terminal), opts.initial.encode());
    env.set_state_features({5, 5, 2, 2, 4}, std::move(features));
    env.describe_state = [](int s) { return ff_state_description(FfState::decode(s)); };
    env.describe_action = [](int a) { return ff_action_name(static_cast<FfAction>(a)); };
    env.state_fields = [](int s) { return ff_state_fields(FfState::decode(s)); };
    env.value_names = {"professionalism", "proximity"};
    return env;
}

}  // namespace svsl
