#pragma once

// Brute-force references shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "svsl/pareto.hpp"
#include "svsl/reward_models.hpp"
#include "svsl/value_metrics.hpp"

namespace oracle {

using namespace svsl;

// Exact dominated volume by cell decomposition on the grid of all coordinates.
inline double hv_cells(const std::vector<std::vector<double>>& pts, const std::vector<double>& ref) {
    const std::size_t d = ref.size();
    std::vector<std::vector<double>> axes(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::set<double> c{ref[i]};
        for (const auto& p : pts)
            if (p[i] >= ref[i]) c.insert(p[i]);
        axes[i].assign(c.begin(), c.end());
    }
    double total = 0.0;
    std::vector<std::size_t> idx(d, 0);
    std::function<void(std::size_t)> walk = [&](std::size_t dim) {
        if (dim == d) {
            double vol = 1.0;
            std::vector<double> upper(d);
            for (std::size_t i = 0; i < d; ++i) {
                vol *= axes[i][idx[i] + 1] - axes[i][idx[i]];
                upper[i] = axes[i][idx[i] + 1];
            }
            for (const auto& p : pts) {
                bool covers = true;
                for (std::size_t i = 0; i < d; ++i) covers = covers && p[i] >= upper[i] && p[i] >= ref[i];
                if (covers) {
                    total += vol;
                    break;
                }
            }
            return;
        }
        for (idx[dim] = 0; idx[dim] + 1 < axes[dim].size(); ++idx[dim]) walk(dim + 1);
    };
    if (std::all_of(axes.begin(), axes.end(), [](const auto& a) { return a.size() >= 2; })) walk(0);
    return total;
}

inline std::vector<std::vector<double>> random_points(Rng& rng, int d, int n) {
    std::vector<std::vector<double>> pts;
    for (int k = 0; k < n; ++k) {
        std::vector<double> p;
        for (int i = 0; i < d; ++i) p.push_back(uniform01(rng) * 10.0);
        pts.push_back(p);
    }
    return pts;
}

inline double mul_brute(const std::vector<std::vector<double>>& learned, const Front& oracle) {
    double worst = 0.0;
    for (const auto& op : oracle.points)
        for (const auto& w : op.weights) {
            double u_star = 0.0, u_best = -1e300;
            for (std::size_t i = 0; i < w.size(); ++i) u_star += w[i] * op.value[i];
            for (const auto& p : learned) {
                double u = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) u += w[i] * p[i];
                u_best = std::max(u_best, u);
            }
            worst = std::max(worst, u_star - u_best);
        }
    return worst;
}

// Oracle front over random candidates: each weight keeps its maximizer.
inline Front weighted_front(const std::vector<std::vector<double>>& candidates, const std::vector<Weights>& grid) {
    std::vector<FrontPoint> pts;
    for (const auto& w : grid) {
        std::size_t best = 0;
        double bu = -1e300;
        for (std::size_t k = 0; k < candidates.size(); ++k) {
            double u = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) u += w[i] * candidates[k][i];
            if (u > bu) {
                bu = u;
                best = k;
            }
        }
        pts.push_back({candidates[best], {w}});
    }
    return pareto_filter(pts);
}

// Brute-force references. They recompute every return by walking the steps
// and never touch the feature cache or the library's label helpers.

struct Instance {
    int S = 5, A = 2, m = 2, agents = 3;
    RewardTable grounding;
    Dataset data;
    Assignment beta;
    std::vector<Weights> weights;
};

inline Weights eighths_weight(Rng& rng, int m) {
    // Dyadic weights keep w . G exact so ties are real ties.
    std::vector<int> parts(static_cast<std::size_t>(m), 0);
    for (int k = 0; k < 8; ++k) ++parts[uniform_index(rng, static_cast<std::size_t>(m))];
    Weights w;
    for (int p : parts) w.push_back(p / 8.0);
    return w;
}

inline Instance random_instance(Rng& rng) {
    Instance in;
    in.S = 3 + static_cast<int>(uniform_index(rng, 4));
    in.A = 2 + static_cast<int>(uniform_index(rng, 2));
    in.m = 2 + static_cast<int>(uniform_index(rng, 2));
    in.agents = 1 + static_cast<int>(uniform_index(rng, 5));
    in.grounding = RewardTable(in.S * in.A, in.m);
    for (auto& v : in.grounding.values) v = static_cast<double>(static_cast<int>(uniform_index(rng, 5)) - 2);
    in.data = testutil::random_dataset(in.agents, 3 + static_cast<int>(uniform_index(rng, 10)), in.S, in.A, in.m, rng);
    const int L = 1 + static_cast<int>(uniform_index(rng, 4));
    for (int l = 0; l < L; ++l) in.weights.push_back(eighths_weight(rng, in.m));
    for (int j = 0; j < in.agents; ++j) in.beta.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(L))));
    return in;
}

inline double ref_scalar(const TrajectoryData& t, const RewardTable& g, const Weights& w, int A) {
    const auto G = testutil::naive_return(t.trajectory, g, A, 1.0);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * G[i];
    return s;
}

inline double ref_coherence(const Instance& in, int value) {
    double total = 0.0;
    for (int j = 0; j < in.agents; ++j) {
        int diff = 0;
        const auto recs = in.data.agent_records(j);
        for (const auto& r : recs) {
            const auto ga = testutil::naive_return(r.first->trajectory, in.grounding, in.A, 1.0);
            const auto gb = testutil::naive_return(r.second->trajectory, in.grounding, in.A, 1.0);
            if (testutil::naive_label(ga[static_cast<std::size_t>(value)], gb[static_cast<std::size_t>(value)]) !=
                r.values[static_cast<std::size_t>(value)])
                ++diff;
        }
        total += static_cast<double>(diff) / static_cast<double>(recs.size());
    }
    return 1.0 - total / in.agents;
}

inline double ref_repr(const Instance& in) {
    double total = 0.0;
    for (int j = 0; j < in.agents; ++j) {
        const auto& w = in.weights[static_cast<std::size_t>(in.beta[static_cast<std::size_t>(j)])];
        int diff = 0;
        const auto recs = in.data.agent_records(j);
        for (const auto& r : recs)
            if (testutil::naive_label(ref_scalar(*r.first, in.grounding, w, in.A),
                                      ref_scalar(*r.second, in.grounding, w, in.A)) != r.value_system)
                ++diff;
        total += static_cast<double>(diff) / static_cast<double>(recs.size());
    }
    return 1.0 - total / in.agents;
}

inline double ref_conc(const Instance& in, bool* single) {
    std::set<int> live(in.beta.begin(), in.beta.end());
    *single = live.size() < 2;
    if (*single) return 0.0;
    // Distinct ordered pairs of step sequences, linear scan.
    std::vector<std::pair<const TrajectoryData*, const TrajectoryData*>> pairs;
    for (int j = 0; j < in.agents; ++j)
        for (const auto& r : in.data.agent_records(j)) {
            bool dup = false;
            for (const auto& [x, y] : pairs)
                dup = dup || (x->trajectory == r.first->trajectory && y->trajectory == r.second->trajectory);
            if (!dup) pairs.push_back({r.first.get(), r.second.get()});
        }
    double best = 1.0;
    for (int a : live)
        for (int b : live) {
            if (a == b) continue;
            int diff = 0;
            for (const auto& [x, y] : pairs) {
                const auto& wa = in.weights[static_cast<std::size_t>(a)];
                const auto& wb = in.weights[static_cast<std::size_t>(b)];
                const auto la = testutil::naive_label(ref_scalar(*x, in.grounding, wa, in.A), ref_scalar(*y, in.grounding, wa, in.A));
                const auto lb = testutil::naive_label(ref_scalar(*x, in.grounding, wb, in.A), ref_scalar(*y, in.grounding, wb, in.A));
                if (la != lb) ++diff;
            }
            best = std::min(best, static_cast<double>(diff) / static_cast<double>(pairs.size()));
        }
    return best;
}

struct GradInstance {
    TabularMomdp env;
    Dataset data;
    Assignment beta;
};

inline GradInstance grad_instance(Rng& rng) {
    const int S = 6, A = 3, m = 2 + static_cast<int>(uniform_index(rng, 2));
    auto env = testutil::random_momdp(S, A, m, 8, rng);
    auto data = testutil::random_dataset(4, 6, S, A, m, rng);
    Assignment beta;
    for (int j = 0; j < 4; ++j) beta.push_back(static_cast<int>(uniform_index(rng, 3)));
    return {std::move(env), std::move(data), std::move(beta)};
}

inline double total_loss(const LossBatch& batch, const RewardVectorModel& model, const ValueSystemBank& bank,
                  const Assignment& beta, const LossSelector& sel) {
    return evaluate_losses(batch, model.table(), bank, beta, sel, nullptr).total;
}

struct GradReport {
    double worst_theta = 0.0;
    double worst_omega = 0.0;
    int checked = 0;
};

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Central differences on 20 random theta entries and every omega entry, 10 instances.
inline GradReport gradient_check(const RewardModelConfig& cfg, std::uint64_t seed) {
    GradReport rep;
    Rng rng(seed);
    for (int inst = 0; inst < 10; ++inst) {
        auto g = grad_instance(rng);
        RewardVectorModel model(g.env, cfg);
        model.initialize(rng);
        if (cfg.mode == RewardModelMode::TabularTanh)
            for (auto& p : model.params()) p = standard_normal(rng) * 0.7;
        ValueSystemBank bank(3, g.env.num_values());
        bank.initialize(rng);
        for (auto& o : bank.omega()) o = standard_normal(rng);
        const auto batch = LossBatch::from_dataset(g.data);
        std::vector<double> lambda(static_cast<std::size_t>(g.env.num_values()));
        for (auto& l : lambda) l = 0.5 + uniform01(rng);
        const auto sel = LossSelector::lagrangian(lambda);

        ModelGradients grads;
        loss_gradients(batch, model, bank, g.beta, sel, grads);

        const double h = 1e-6;
        const auto theta_idx = sample_without_replacement(rng, model.params().size(), 20);
        for (auto k : theta_idx) {
            const double keep = model.params()[k];
            model.params()[k] = keep + h;
            const double up = total_loss(batch, model, bank, g.beta, sel);
            model.params()[k] = keep - h;
            const double down = total_loss(batch, model, bank, g.beta, sel);
            model.params()[k] = keep;
            const double fd = (up - down) / (2 * h);
            rep.worst_theta = std::max(rep.worst_theta, rel_error(grads.theta[k], fd));
            ++rep.checked;
        }
        for (std::size_t k = 0; k < bank.omega().size(); ++k) {
            const double keep = bank.omega()[k];
            bank.omega()[k] = keep + h;
            const double up = total_loss(batch, model, bank, g.beta, sel);
            bank.omega()[k] = keep - h;
            const double down = total_loss(batch, model, bank, g.beta, sel);
            bank.omega()[k] = keep;
            const double fd = (up - down) / (2 * h);
            rep.worst_omega = std::max(rep.worst_omega, rel_error(grads.omega[k], fd));
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace oracle
