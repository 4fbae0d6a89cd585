#include "svsl/pareto.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace svsl {

std::vector<std::vector<double>> Front::values() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : points) out.push_back(p.value);
    return out;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

namespace {

bool same_point(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > kDuplicateTolerance) return false;
    return true;
}

}  // namespace

Front pareto_filter(const std::vector<FrontPoint>& points) {
    // Collapse near-duplicates first so dominance is never decided by rounding noise.
    std::vector<FrontPoint> uniq;
    for (const auto& p : points) {
        auto it = std::find_if(uniq.begin(), uniq.end(), [&](const FrontPoint& q) { return same_point(q.value, p.value); });
        if (it == uniq.end()) {
            uniq.push_back(p);
        } else {
            for (const auto& w : p.weights)
                if (std::find(it->weights.begin(), it->weights.end(), w) == it->weights.end()) it->weights.push_back(w);
        }
    }
    Front out;
    for (std::size_t i = 0; i < uniq.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < uniq.size() && !dominated; ++j)
            dominated = j != i && dominates(uniq[j].value, uniq[i].value);
        if (!dominated) out.points.push_back(uniq[i]);
    }
    std::sort(out.points.begin(), out.points.end(),
              [](const FrontPoint& a, const FrontPoint& b) { return a.value > b.value; });
    return out;
}

Front pareto_filter(const std::vector<std::vector<double>>& points) {
    std::vector<FrontPoint> fp;
    for (const auto& p : points) fp.push_back({p, {}});
    return pareto_filter(fp);
}

namespace {

double hv2d(std::vector<std::array<double, 2>> pts, double rx, double ry) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[0] > b[0]; });
    double area = 0.0;
    double top = ry;
    for (const auto& p : pts) {
        if (p[1] > top) {
            area += (p[0] - rx) * (p[1] - top);
            top = p[1];
        }
    }
    return area;
}

// Slices along the last objective and recurses until two objectives remain.
double hv_recursive(const std::vector<std::vector<double>>& pts, std::span<const double> ref) {
    const std::size_t d = ref.size();
    if (pts.empty()) return 0.0;
    if (d == 1) {
        double best = ref[0];
        for (const auto& p : pts) best = std::max(best, p[0]);
        return best - ref[0];
    }
    if (d == 2) {
        std::vector<std::array<double, 2>> p2;
        for (const auto& p : pts) p2.push_back({p[0], p[1]});
        return hv2d(std::move(p2), ref[0], ref[1]);
    }
    std::vector<std::vector<double>> sorted = pts;
    std::sort(sorted.begin(), sorted.end(), [d](const auto& a, const auto& b) { return a[d - 1] > b[d - 1]; });
    double volume = 0.0;
    std::vector<std::vector<double>> slice;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        slice.emplace_back(sorted[k].begin(), sorted[k].end() - 1);
        const double upper = sorted[k][d - 1];
        const double lower = k + 1 < sorted.size() ? sorted[k + 1][d - 1] : ref[d - 1];
        if (upper > lower) volume += hv_recursive(slice, ref.first(d - 1)) * (upper - lower);
    }
    return volume;
}

}  // namespace

double hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> ref) {
    std::vector<std::vector<double>> kept;
    for (const auto& p : points) {
        if (p.size() != ref.size()) throw Error("hypervolume: dimension mismatch");
        bool ok = true;
        for (std::size_t i = 0; i < p.size(); ++i) ok = ok && p[i] >= ref[i];
        if (ok)
            kept.push_back(p);
        else
            log::warn("hypervolume: point does not dominate the reference point, excluded");
    }
    return hv_recursive(kept, ref);
}

double hypervolume(const Front& front, std::span<const double> ref) {
    return hypervolume(front.values(), ref);
}

double mul(const std::vector<std::vector<double>>& learned, const Front& oracle) {
    if (learned.empty()) throw Error("mul: empty learned front");
    double worst = 0.0;
    for (const auto& op : oracle.points) {
        for (const auto& w : op.weights) {
            double best = -INFINITY;
            for (const auto& p : learned) best = std::max(best, dot(w, p));
            worst = std::max(worst, dot(w, op.value) - best);
        }
    }
    return worst;
}

double mul(const Front& learned, const Front& oracle) {
    return mul(learned.values(), oracle);
}

TabularPolicy dp_policy(const TabularMomdp& env, const RewardTable& rewards, std::span<const double> w) {
    const int S = env.num_states();
    const int A = env.num_actions();
    const int H = env.config().horizon;
    const double gamma = env.config().discount;
    TabularPolicy pol;
    pol.action.assign(static_cast<std::size_t>(H), std::vector<int>(static_cast<std::size_t>(S), 0));
    std::vector<double> next_v(static_cast<std::size_t>(S), 0.0), v(static_cast<std::size_t>(S), 0.0);
    for (int t = H - 1; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            double best = -INFINITY;
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                const int ns = env.next_state(s, a);
                const double q = dot(w, rewards.row(env.sa_index(s, a))) +
                                 (env.terminal(ns) ? 0.0 : gamma * next_v[static_cast<std::size_t>(ns)]);
                if (q > best + 1e-9) {
                    best = q;
                    best_a = a;
                }
            }
            v[static_cast<std::size_t>(s)] = best;
            pol.action[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = best_a;
        }
        std::swap(v, next_v);
    }
    return pol;
}

std::vector<double> policy_return(const TabularMomdp& env, const TabularPolicy& policy, const RewardTable& rewards) {
    Rng unused(0);
    const Trajectory traj = rollout(env, [&](int s, int t, Rng&) { return policy(s, t); }, unused);
    return discounted_alignment(traj, rewards, env.num_actions(), env.config().discount);
}

std::vector<OracleSolution> dp_oracle_solutions(const TabularMomdp& env, const std::vector<Weights>& grid) {
    std::vector<OracleSolution> out;
    for (const auto& w : grid) {
        OracleSolution sol{w, dp_policy(env, env.reward_table(), w), {}};
        sol.value = policy_return(env, sol.policy, env.reward_table());
        out.push_back(std::move(sol));
    }
    return out;
}

Front dp_oracle_front(const TabularMomdp& env, const std::vector<Weights>& grid) {
    std::vector<FrontPoint> pts;
    for (auto& sol : dp_oracle_solutions(env, grid)) pts.push_back({std::move(sol.value), {sol.weight}});
    Front f = pareto_filter(pts);
    // A weight whose optimum was weakly dominated is equally optimal at the
    // dominating point; keep it so MUL still checks that weight.
    for (const auto& p : pts) {
        const auto& w = p.weights.front();
        bool present = false;
        for (const auto& q : f.points)
            present = present || std::find(q.weights.begin(), q.weights.end(), w) != q.weights.end();
        if (present) continue;
        std::size_t best = 0;
        for (std::size_t k = 1; k < f.points.size(); ++k)
            if (dot(w, f.points[k].value) > dot(w, f.points[best].value)) best = k;
        f.points[best].weights.push_back(w);
    }
    f.provenance = "oracle";
    return f;
}

}  // namespace svsl
