#pragma once

#include <span>
#include <string>
#include <vector>

#include "svsl/environment.hpp"

namespace svsl {

struct FrontPoint {
    std::vector<double> value;
    /// Scalarization weights whose policies produced this return.
    std::vector<Weights> weights;
};

struct Front {
    std::vector<FrontPoint> points;
    std::string provenance;  // "all", "clusters", "oracle", ...

    std::size_t size() const { return points.size(); }
    std::vector<std::vector<double>> values() const;
};

/// Returns within this distance (max-norm) are treated as the same point.
inline constexpr double kDuplicateTolerance = 1e-9;

/// true when a >= b componentwise and a > b somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);

/// Maximal nondominated subset. Duplicates collapse into one point that keeps
/// the union of their weights; output is sorted lexicographically descending.
Front pareto_filter(const std::vector<FrontPoint>& points);
Front pareto_filter(const std::vector<std::vector<double>>& points);

/// Dominated hypervolume relative to `ref`. Points that do not weakly dominate
/// the reference are dropped with a warning.
double hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> ref);
double hypervolume(const Front& front, std::span<const double> ref);

/// Maximum utility loss of `learned` against an oracle front that carries its weights.
double mul(const std::vector<std::vector<double>>& learned, const Front& oracle);
double mul(const Front& learned, const Front& oracle);

/// Time-indexed greedy policy: action[t][s].
struct TabularPolicy {
    std::vector<std::vector<int>> action;

    int operator()(int s, int t) const { return action[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]; }
};

/// Finite-horizon value iteration on the scalarized reward w . R. Ties within
/// 1e-9 go to the lowest action index.
TabularPolicy dp_policy(const TabularMomdp& env, const RewardTable& rewards, std::span<const double> w);

/// Vector return of a policy from the initial state under `rewards`.
std::vector<double> policy_return(const TabularMomdp& env, const TabularPolicy& policy, const RewardTable& rewards);

struct OracleSolution {
    Weights weight;
    TabularPolicy policy;
    std::vector<double> value;
};

/// DP optimum for every grid weight (ground-truth rewards of `env`).
std::vector<OracleSolution> dp_oracle_solutions(const TabularMomdp& env, const std::vector<Weights>& grid);
Front dp_oracle_front(const TabularMomdp& env, const std::vector<Weights>& grid);

}  // namespace svsl
