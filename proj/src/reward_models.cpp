#include "svsl/reward_models.hpp"

#include <algorithm>
#include <cmath>

namespace svsl {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double xlogy(double x, double y) {
    return x == 0.0 ? 0.0 : x * std::log(y);
}

double clamp_probability(double p, bool* clamped) {
    const double c = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (clamped && c != p) *clamped = true;
    return c;
}

}  // namespace

std::string to_string(RewardModelMode mode) {
    return mode == RewardModelMode::TabularTanh ? "tabular-tanh" : "mlp";
}

RewardModelMode reward_mode_from_string(const std::string& s) {
    if (s == "tabular-tanh" || s == "tabular") return RewardModelMode::TabularTanh;
    if (s == "mlp") return RewardModelMode::Mlp;
    throw Error("unknown reward model mode: " + s);
}

std::string to_string(OneHotEncoding enc) {
    return enc == OneHotEncoding::Factored ? "factored" : "joint";
}

OneHotEncoding onehot_from_string(const std::string& s) {
    if (s == "factored") return OneHotEncoding::Factored;
    if (s == "joint") return OneHotEncoding::Joint;
    throw Error("unknown one-hot encoding: " + s);
}

// ---------------------------------------------------------------------------

RewardVectorModel::RewardVectorModel(const TabularMomdp& env, RewardModelConfig cfg)
    : cfg_(std::move(cfg)), num_sa_(env.config().num_state_actions()), num_values_(env.num_values()) {
    if (cfg_.mode == RewardModelMode::TabularTanh) {
        params_.assign(static_cast<std::size_t>(num_sa_) * num_values_, 0.0);
        return;
    }
    int input_dim = 0;
    if (cfg_.onehot == OneHotEncoding::Joint) {
        input_dim = num_sa_;
    } else {
        const auto& card = env.feature_cardinalities();
        for (int c : card) input_dim += c;
        input_dim += env.num_actions();
        auto x = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(input_dim, num_sa_));
        for (int s = 0; s < env.num_states(); ++s) {
            const auto& f = env.state_features(s);
            for (int a = 0; a < env.num_actions(); ++a) {
                const int sa = env.sa_index(s, a);
                int off = 0;
                for (std::size_t k = 0; k < f.size(); ++k) {
                    (*x)(off + f[k], sa) = 1.0;
                    off += card[k];
                }
                (*x)(off + a, sa) = 1.0;
            }
        }
        inputs_ = std::move(x);
    }
    net_ = Mlp(input_dim, cfg_.hidden, 1, false);
    params_.assign(net_.num_params() * static_cast<std::size_t>(num_values_), 0.0);
}

void RewardVectorModel::initialize(Rng& rng) {
    if (cfg_.mode == RewardModelMode::TabularTanh) {
        std::fill(params_.begin(), params_.end(), 0.0);
        return;
    }
    const std::size_t n = net_.num_params();
    for (int i = 0; i < num_values_; ++i) net_.initialize(std::span<double>(params_).subspan(i * n, n), rng);
}

RewardEvaluation RewardVectorModel::evaluate() const {
    RewardEvaluation ev;
    ev.table = RewardTable(num_sa_, num_values_);
    if (cfg_.mode == RewardModelMode::TabularTanh) {
        for (std::size_t k = 0; k < params_.size(); ++k) ev.table.values[k] = std::tanh(params_[k]);
        return ev;
    }
    const std::size_t n = net_.num_params();
    ev.workspaces.resize(static_cast<std::size_t>(num_values_));
    for (int i = 0; i < num_values_; ++i) {
        const auto p = std::span<const double>(params_).subspan(i * n, n);
        Eigen::MatrixXd out = net_.forward(p, inputs_.get(), &ev.workspaces[static_cast<std::size_t>(i)]);
        for (int sa = 0; sa < num_sa_; ++sa) ev.table.at(sa, i) = std::clamp(out(0, sa), -cfg_.clamp, cfg_.clamp);
        ev.raw.push_back(std::move(out));
    }
    return ev;
}

void RewardVectorModel::backward(const RewardEvaluation& eval, const RewardTable& upstream,
                                 std::span<double> grad) const {
    if (cfg_.mode == RewardModelMode::TabularTanh) {
        for (std::size_t k = 0; k < params_.size(); ++k) {
            const double t = eval.table.values[k];
            grad[k] += upstream.values[k] * (1.0 - t * t);
        }
        return;
    }
    const std::size_t n = net_.num_params();
    for (int i = 0; i < num_values_; ++i) {
        Eigen::MatrixXd d_out(1, num_sa_);
        const auto& raw = eval.raw[static_cast<std::size_t>(i)];
        bool any = false;
        for (int sa = 0; sa < num_sa_; ++sa) {
            const double r = raw(0, sa);
            const double g = (r >= -cfg_.clamp && r <= cfg_.clamp) ? upstream.at(sa, i) : 0.0;
            d_out(0, sa) = g;
            any = any || g != 0.0;
        }
        if (!any) continue;
        net_.backward(std::span<const double>(params_).subspan(i * n, n), inputs_.get(),
                      eval.workspaces[static_cast<std::size_t>(i)], d_out, grad.subspan(i * n, n));
    }
}

// ---------------------------------------------------------------------------

ValueSystemBank::ValueSystemBank(int max_clusters, int num_values)
    : max_clusters_(max_clusters),
      num_values_(num_values),
      omega_(static_cast<std::size_t>(max_clusters) * num_values, 0.0) {
    if (max_clusters < 1 || num_values < 1) throw Error("ValueSystemBank: empty shape");
}

void ValueSystemBank::initialize(Rng& rng) {
    for (double& x : omega_) x = standard_normal(rng);
}

void ValueSystemBank::randomize_row(int l, Rng& rng) {
    for (int i = 0; i < num_values_; ++i) omega_[static_cast<std::size_t>(l) * num_values_ + i] = standard_normal(rng);
}

std::span<const double> ValueSystemBank::logits(int l) const {
    return std::span<const double>(omega_).subspan(static_cast<std::size_t>(l) * num_values_,
                                                   static_cast<std::size_t>(num_values_));
}

Weights ValueSystemBank::weights(int l) const {
    return softmax_weights(logits(l));
}

std::vector<Weights> ValueSystemBank::all_weights() const {
    std::vector<Weights> out;
    for (int l = 0; l < max_clusters_; ++l) out.push_back(weights(l));
    return out;
}

Weights softmax_weights(std::span<const double> omega_row) {
    return softmax(omega_row);
}

double scalarized_return(const TrajectoryData& traj, std::span<const double> weights, const RewardTable& grounding) {
    const auto g = discounted_alignment(traj, grounding);
    return dot(weights, g);
}

// ---------------------------------------------------------------------------

double smoothed_label(double y) {
    if (y == 0.0) return kLabelSmoothing;
    if (y == 0.5) return 0.5;
    if (y == 1.0) return 1.0 - kLabelSmoothing;
    throw Error("smoothed_label: expected a raw label in {0, 0.5, 1}");
}

double smoothed_label(Preference y) {
    return smoothed_label(to_value(y));
}

double ce_loss(double p, double y, bool* clamped) {
    p = clamp_probability(p, clamped);
    return -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
}

double jsd_bernoulli(double p, double q, bool* clamped) {
    p = clamp_probability(p, clamped);
    q = clamp_probability(q, clamped);
    const double m = 0.5 * (p + q);
    const double kl_p = xlogy(p, p / m) + xlogy(1.0 - p, (1.0 - p) / (1.0 - m));
    const double kl_q = xlogy(q, q / m) + xlogy(1.0 - q, (1.0 - q) / (1.0 - m));
    return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

LossBatch LossBatch::from_dataset(const Dataset& data) {
    LossBatch b;
    for (int j = 0; j < data.num_agents(); ++j) {
        Group g;
        g.agent = j;
        for (const auto& r : data.agent_records(j)) g.rows.push_back(&r);
        b.groups.push_back(std::move(g));
    }
    return b;
}

LossBatch LossBatch::pooled(std::vector<const PreferenceRecord*> rows) {
    LossBatch b;
    b.groups.push_back({-1, std::move(rows)});
    return b;
}

std::size_t LossBatch::num_rows() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.rows.size();
    return n;
}

LossSelector LossSelector::lagrangian(std::span<const double> lambda) {
    return {1.0, 1.0, std::vector<double>(lambda.begin(), lambda.end())};
}

LossSelector LossSelector::value_system(int num_values) {
    return {1.0, 1.0, std::vector<double>(static_cast<std::size_t>(num_values), 0.0)};
}

LossSelector LossSelector::grounding(int num_values) {
    return {0.0, 0.0, std::vector<double>(static_cast<std::size_t>(num_values), 1.0)};
}

LossSelector LossSelector::single_value(int value, int num_values) {
    LossSelector s{0.0, 0.0, std::vector<double>(static_cast<std::size_t>(num_values), 0.0)};
    s.value[static_cast<std::size_t>(value)] = 1.0;
    return s;
}

namespace {

// d JSD / d p for Bernoulli(p) vs Bernoulli(q): 0.5 * (logit(p) - logit((p+q)/2)).
double jsd_dp(double p, double q) {
    const double m = 0.5 * (p + q);
    return 0.5 * (std::log(p / (1.0 - p)) - std::log(m / (1.0 - m)));
}

}  // namespace

LossTerms evaluate_losses(const LossBatch& batch, const RewardTable& grounding, const ValueSystemBank& bank,
                          const Assignment& beta, const LossSelector& selector, TableGradient* grad) {
    const int m = grounding.num_values;
    LossTerms terms;
    terms.value.assign(static_cast<std::size_t>(m), 0.0);
    if (static_cast<int>(selector.value.size()) != m) throw Error("loss selector has wrong number of value coefficients");

    if (grad) {
        grad->d_table = RewardTable(grounding.num_state_actions, m);
        grad->d_omega.assign(bank.omega().size(), 0.0);
    }

    std::size_t live_groups = 0;
    for (const auto& g : batch.groups) {
        if (g.rows.empty())
            log::info("loss batch: agent " + std::to_string(g.agent) + " has no rows, skipped");
        else
            ++live_groups;
    }
    if (live_groups == 0) return terms;

    const bool clustered = !beta.empty();
    const std::vector<int> live = clustered ? live_clusters(beta) : std::vector<int>{};
    std::vector<Weights> W;
    if (clustered) W = bank.all_weights();
    std::vector<std::vector<double>> dW(W.size(), std::vector<double>(static_cast<std::size_t>(m), 0.0));

    std::vector<double> ga(static_cast<std::size_t>(m)), gb(static_cast<std::size_t>(m)),
        delta(static_cast<std::size_t>(m)), d_delta(static_cast<std::size_t>(m));

    for (const auto& group : batch.groups) {
        if (group.rows.empty()) continue;
        const double row_w = 1.0 / (static_cast<double>(live_groups) * static_cast<double>(group.rows.size()));
        const int own = (clustered && group.agent >= 0) ? beta.at(static_cast<std::size_t>(group.agent)) : -1;

        for (const PreferenceRecord* rec : group.rows) {
            discounted_alignment(*rec->first, grounding, ga);
            discounted_alignment(*rec->second, grounding, gb);
            for (int i = 0; i < m; ++i) delta[i] = ga[i] - gb[i];
            std::fill(d_delta.begin(), d_delta.end(), 0.0);

            for (int i = 0; i < m; ++i) {
                const double z = delta[i];
                const double y = smoothed_label(rec->values[static_cast<std::size_t>(i)]);
                terms.value[i] += row_w * (y * softplus(-z) + (1.0 - y) * softplus(z));
                d_delta[i] += selector.value[i] * row_w * (sigmoid(z) - y);
            }

            if (own >= 0) {
                const auto& w = W[static_cast<std::size_t>(own)];
                const double z = dot(w, delta);
                const double y = smoothed_label(rec->value_system);
                terms.repr += row_w * (y * softplus(-z) + (1.0 - y) * softplus(z));
                const double g = selector.repr * row_w * (sigmoid(z) - y);
                if (g != 0.0) {
                    for (int i = 0; i < m; ++i) {
                        d_delta[i] += g * w[i];
                        dW[static_cast<std::size_t>(own)][i] += g * delta[i];
                    }
                }
            }

            for (std::size_t c = 0; c < live.size(); ++c) {
                for (std::size_t d = c + 1; d < live.size(); ++d) {
                    const auto l1 = static_cast<std::size_t>(live[c]);
                    const auto l2 = static_cast<std::size_t>(live[d]);
                    const double z1 = dot(W[l1], delta);
                    const double z2 = dot(W[l2], delta);
                    bool c1 = false, c2 = false;
                    const double p = clamp_probability(sigmoid(z1), &c1);
                    const double q = clamp_probability(sigmoid(z2), &c2);
                    terms.clamped = terms.clamped || c1 || c2;
                    terms.conc += row_w * jsd_bernoulli(p, q);
                    const double coef = -selector.conc * row_w;
                    if (coef == 0.0) continue;
                    const double g1 = c1 ? 0.0 : coef * jsd_dp(p, q) * p * (1.0 - p);
                    const double g2 = c2 ? 0.0 : coef * jsd_dp(q, p) * q * (1.0 - q);
                    for (int i = 0; i < m; ++i) {
                        d_delta[i] += g1 * W[l1][i] + g2 * W[l2][i];
                        dW[l1][i] += g1 * delta[i];
                        dW[l2][i] += g2 * delta[i];
                    }
                }
            }

            if (grad) {
                for (const SaWeight& f : rec->first->features)
                    for (int i = 0; i < m; ++i) grad->d_table.at(f.sa, i) += f.weight * d_delta[i];
                for (const SaWeight& f : rec->second->features)
                    for (int i = 0; i < m; ++i) grad->d_table.at(f.sa, i) -= f.weight * d_delta[i];
            }
        }
    }

    terms.total = selector.repr * terms.repr - selector.conc * terms.conc;
    for (int i = 0; i < m; ++i) terms.total += selector.value[i] * terms.value[i];

    if (grad) {
        // Softmax backward: d omega_k = W_k (dW_k - W . dW).
        for (std::size_t l = 0; l < W.size(); ++l) {
            const double wd = dot(W[l], dW[l]);
            for (int k = 0; k < m; ++k)
                grad->d_omega[l * static_cast<std::size_t>(m) + k] = W[l][k] * (dW[l][k] - wd);
        }
    }
    return terms;
}

NonFiniteGradient::NonFiniteGradient(const std::string& blk, std::size_t idx)
    : Error("non-finite gradient in parameter block '" + blk + "' at index " + std::to_string(idx)),
      block(blk),
      index(idx) {}

LossTerms loss_gradients(const LossBatch& batch, const RewardVectorModel& model, const ValueSystemBank& bank,
                         const Assignment& beta, const LossSelector& selector, ModelGradients& out) {
    const RewardEvaluation eval = model.evaluate();
    TableGradient tg;
    LossTerms terms = evaluate_losses(batch, eval.table, bank, beta, selector, &tg);
    out.theta.assign(model.params().size(), 0.0);
    model.backward(eval, tg.d_table, out.theta);
    out.omega = std::move(tg.d_omega);
    for (std::size_t k = 0; k < out.theta.size(); ++k)
        if (!std::isfinite(out.theta[k])) throw NonFiniteGradient("theta", k);
    for (std::size_t k = 0; k < out.omega.size(); ++k)
        if (!std::isfinite(out.omega[k])) throw NonFiniteGradient("omega", k);
    return terms;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::reset() {
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    t_ = 0;
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw Error("Adam: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grad[k] + cfg_.weight_decay * params[k];
        m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
        v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[k] / bc1;
        const double vhat = v_[k] / bc2;
        params[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

nlohmann::json Adam::to_json() const {
    return {{"lr", cfg_.lr},       {"beta1", cfg_.beta1}, {"beta2", cfg_.beta2},
            {"eps", cfg_.eps},     {"weight_decay", cfg_.weight_decay},
            {"t", t_},             {"m", m_},             {"v", v_}};
}

Adam Adam::from_json(const nlohmann::json& j) {
    AdamConfig cfg;
    cfg.lr = j.at("lr").get<double>();
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.eps = j.at("eps").get<double>();
    cfg.weight_decay = j.at("weight_decay").get<double>();
    Adam a;
    a.cfg_ = cfg;
    a.t_ = j.at("t").get<std::size_t>();
    a.m_ = j.at("m").get<std::vector<double>>();
    a.v_ = j.at("v").get<std::vector<double>>();
    return a;
}

LagrangeState LagrangeState::initial(int num_values, double lambda0) {
    return {std::vector<double>(static_cast<std::size_t>(num_values), lambda0),
            std::vector<double>(static_cast<std::size_t>(num_values), 0.0)};
}

}  // namespace svsl
