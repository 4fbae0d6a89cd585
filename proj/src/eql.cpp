#include "svsl/eql.hpp"

#include <algorithm>
#include <cmath>

namespace svsl {

double Schedule::operator()(long t) const {
    if (horizon <= 0 || t >= horizon) return end;
    if (t <= 0) return start;
    const double f = static_cast<double>(t) / static_cast<double>(horizon);
    return start + (end - start) * f;
}

// ---------------------------------------------------------------------------
// QModel
// ---------------------------------------------------------------------------

QModel::QModel(const TabularMomdp& env, QModelConfig cfg, Rng& rng)
    : cfg_(std::move(cfg)),
      num_states_(env.num_states()),
      num_actions_(env.num_actions()),
      num_values_(env.num_values()) {
    if (cfg_.mode == QMode::Tabular) {
        if (cfg_.grid_points < 1) throw Error("QModel: grid_points must be positive");
        grid_ = equally_spaced_weights(num_values_, cfg_.grid_points);
        const std::size_t n = grid_.size() * static_cast<std::size_t>(num_states_) * num_actions_ * num_values_;
        online_.assign(n, 0.0);
        target_.assign(n, 0.0);
        stamp_.assign(n / static_cast<std::size_t>(num_values_), 0);
        return;
    }
    const auto& card = env.feature_cardinalities();
    int off = 0;
    for (int c : card) {
        feature_offsets_.push_back(off);
        off += c;
    }
    for (int s = 0; s < num_states_; ++s) state_features_.push_back(env.state_features(s));
    input_dim_ = off + num_values_;
    net_ = Mlp(input_dim_, cfg_.hidden, num_actions_ * num_values_, true);
    params_.assign(net_.num_params(), 0.0);
    net_.initialize(params_, rng);
    target_params_ = params_;
    adam_ = Adam(params_.size(), AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8, 0.0});
}

int QModel::grid_index(std::span<const double> w) const {
    if (num_values_ == 2) {
        const double x = w[0] * static_cast<double>(grid_.size() - 1);
        const long k = static_cast<long>(std::ceil(x - 0.5));
        return static_cast<int>(std::clamp<long>(k, 0, static_cast<long>(grid_.size()) - 1));
    }
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
        double d = 0.0;
        for (int i = 0; i < num_values_; ++i) d += (grid_[g][i] - w[i]) * (grid_[g][i] - w[i]);
        if (d < best_d) {
            best_d = d;
            best = g;
        }
    }
    return static_cast<int>(best);
}

std::size_t QModel::entry(int grid, int s, int a) const {
    return (static_cast<std::size_t>(grid) * num_states_ + s) * num_actions_ + a;
}

void QModel::refresh_target(std::size_t e) const {
    const std::uint64_t n = clock_ - stamp_[e];
    if (n == 0) return;
    if (decay_.size() <= n) {
        const double log_keep = std::log1p(-tau_);
        const std::size_t from = decay_.size();
        decay_.resize(std::max<std::size_t>(n + 1, 2 * from));
        for (std::size_t k = from; k < decay_.size(); ++k) decay_[k] = std::exp(static_cast<double>(k) * log_keep);
    }
    const double f = decay_[n];
    for (int i = 0; i < num_values_; ++i) {
        const std::size_t k = e * num_values_ + i;
        target_[k] = online_[k] + f * (target_[k] - online_[k]);
    }
    stamp_[e] = clock_;
}

void QModel::mlp_input(int s, std::span<const double> w, double* col) const {
    std::fill(col, col + input_dim_, 0.0);
    const auto& f = state_features_[static_cast<std::size_t>(s)];
    for (std::size_t k = 0; k < f.size(); ++k) col[feature_offsets_[k] + f[k]] = 1.0;
    const int base = input_dim_ - num_values_;
    for (int i = 0; i < num_values_; ++i) col[base + i] = w[i];
}

void QModel::evaluate(int s, std::span<const double> w, std::span<double> out) const {
    if (cfg_.mode == QMode::Tabular) {
        const std::size_t e = entry(grid_index(w), s, 0);
        std::copy_n(online_.begin() + static_cast<std::ptrdiff_t>(e * num_values_),
                    num_actions_ * num_values_, out.begin());
        return;
    }
    Eigen::MatrixXd x(input_dim_, 1);
    mlp_input(s, w, x.data());
    const Eigen::MatrixXd y = net_.forward(params_, &x, nullptr);
    std::copy_n(y.data(), num_actions_ * num_values_, out.begin());
}

void QModel::evaluate_target(int s, std::span<const double> w, std::span<double> out) const {
    if (cfg_.mode == QMode::Tabular) {
        const std::size_t e = entry(grid_index(w), s, 0);
        for (int a = 0; a < num_actions_; ++a) refresh_target(e + a);
        std::copy_n(target_.begin() + static_cast<std::ptrdiff_t>(e * num_values_),
                    num_actions_ * num_values_, out.begin());
        return;
    }
    Eigen::MatrixXd x(input_dim_, 1);
    mlp_input(s, w, x.data());
    const Eigen::MatrixXd y = net_.forward(target_params_, &x, nullptr);
    std::copy_n(y.data(), num_actions_ * num_values_, out.begin());
}

int QModel::greedy_action(int s, std::span<const double> w) const {
    std::vector<double> q(static_cast<std::size_t>(num_actions_ * num_values_));
    evaluate(s, w, q);
    int best = 0;
    double best_v = -INFINITY;
    for (int a = 0; a < num_actions_; ++a) {
        const double v = dot(w, std::span<const double>(q).subspan(static_cast<std::size_t>(a * num_values_),
                                                                   static_cast<std::size_t>(num_values_)));
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

double QModel::train(std::span<const Sample> samples, double h) {
    if (samples.empty()) return 0.0;
    const int m = num_values_;
    double total = 0.0;
    if (cfg_.mode == QMode::Tabular) {
        std::vector<double> diff(static_cast<std::size_t>(m));
        for (const Sample& smp : samples) {
            const std::span<const double> w(smp.w, static_cast<std::size_t>(m));
            const std::size_t e = entry(grid_index(w), smp.s, smp.a);
            refresh_target(e);
            double* q = online_.data() + e * m;
            double sq = 0.0, sc = 0.0;
            for (int i = 0; i < m; ++i) {
                diff[i] = smp.y[i] - q[i];
                sq += diff[i] * diff[i];
                sc += smp.w[i] * diff[i];
            }
            total += (1.0 - h) * sq + h * std::abs(sc);
            const double sgn = sc > 0.0 ? 1.0 : (sc < 0.0 ? -1.0 : 0.0);
            for (int i = 0; i < m; ++i) q[i] += cfg_.q_step * (2.0 * (1.0 - h) * diff[i] + h * sgn * smp.w[i]);
        }
        return total / static_cast<double>(samples.size());
    }

    const auto B = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd x(input_dim_, B);
    for (Eigen::Index b = 0; b < B; ++b)
        mlp_input(samples[b].s, std::span<const double>(samples[b].w, static_cast<std::size_t>(m)), x.col(b).data());
    Mlp::Workspace ws;
    const Eigen::MatrixXd out = net_.forward(params_, &x, &ws);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(out.rows(), B);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const Sample& smp = samples[b];
        double sq = 0.0, sc = 0.0;
        for (int i = 0; i < m; ++i) {
            const double d = smp.y[i] - out(smp.a * m + i, b);
            sq += d * d;
            sc += smp.w[i] * d;
        }
        total += (1.0 - h) * sq + h * std::abs(sc);
        const double sgn = sc > 0.0 ? 1.0 : (sc < 0.0 ? -1.0 : 0.0);
        for (int i = 0; i < m; ++i) {
            const double d = smp.y[i] - out(smp.a * m + i, b);
            d_out(smp.a * m + i, b) = inv_b * (-2.0 * (1.0 - h) * d - h * sgn * smp.w[i]);
        }
    }
    std::vector<double> grad(params_.size(), 0.0);
    net_.backward(params_, &x, ws, d_out, grad);
    adam_.step(params_, grad);
    return total * inv_b;
}

void QModel::sync_target() {
    if (cfg_.mode == QMode::Tabular) {
        target_ = online_;
        std::fill(stamp_.begin(), stamp_.end(), clock_);
        return;
    }
    target_params_ = params_;
}

void QModel::polyak(double tau) {
    if (cfg_.mode == QMode::Tabular) {
        if (tau != tau_) {
            for (std::size_t e = 0; e < stamp_.size(); ++e) refresh_target(e);
            tau_ = tau;
            decay_.clear();
        }
        ++clock_;
        return;
    }
    for (std::size_t k = 0; k < params_.size(); ++k)
        target_params_[k] = (1.0 - tau) * target_params_[k] + tau * params_[k];
}

nlohmann::json QModel::to_json() const {
    nlohmann::json j;
    j["mode"] = cfg_.mode == QMode::Tabular ? "tabular" : "mlp";
    j["grid_points"] = cfg_.grid_points;
    j["q_step"] = cfg_.q_step;
    j["lr"] = cfg_.lr;
    j["hidden"] = cfg_.hidden;
    if (cfg_.mode == QMode::Tabular) {
        j["online"] = online_;
        j["target"] = target_;
        j["stamp"] = stamp_;
        j["clock"] = clock_;
        j["tau"] = tau_;
    } else {
        j["params"] = params_;
        j["target_params"] = target_params_;
        j["adam"] = adam_.to_json();
    }
    return j;
}

QModel QModel::from_json(const TabularMomdp& env, const nlohmann::json& j) {
    QModelConfig cfg;
    cfg.mode = j.at("mode").get<std::string>() == "tabular" ? QMode::Tabular : QMode::Mlp;
    cfg.grid_points = j.at("grid_points").get<int>();
    cfg.q_step = j.at("q_step").get<double>();
    cfg.lr = j.at("lr").get<double>();
    cfg.hidden = j.at("hidden").get<std::vector<int>>();
    Rng rng(0);
    QModel q(env, cfg, rng);
    if (cfg.mode == QMode::Tabular) {
        q.online_ = j.at("online").get<std::vector<double>>();
        q.target_ = j.at("target").get<std::vector<double>>();
        q.stamp_ = j.at("stamp").get<std::vector<std::uint64_t>>();
        q.clock_ = j.at("clock").get<std::uint64_t>();
        q.tau_ = j.at("tau").get<double>();
    } else {
        q.params_ = j.at("params").get<std::vector<double>>();
        q.target_params_ = j.at("target_params").get<std::vector<double>>();
        q.adam_ = Adam::from_json(j.at("adam"));
    }
    return q;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

SumTree::SumTree(std::size_t leaves) {
    while (base_ < leaves) base_ <<= 1;
    tree_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t i, double value) {
    std::size_t k = base_ + i;
    tree_[k] = value;
    for (k >>= 1; k >= 1; k >>= 1) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
}

std::size_t SumTree::find(double u) const {
    std::size_t k = 1;
    while (k < base_) {
        const std::size_t left = 2 * k;
        if (u < tree_[left] || tree_[left + 1] <= 0.0) {
            k = left;
        } else {
            u -= tree_[left];
            k = left + 1;
        }
    }
    return k - base_;
}

ExperienceBuffer::ExperienceBuffer(std::size_t capacity, int num_values, double alpha_per, double eps_per)
    : capacity_(capacity),
      m_(num_values),
      alpha_(alpha_per),
      eps_(eps_per),
      s_(capacity),
      a_(capacity),
      s_next_(capacity),
      done_(capacity),
      r_(capacity * num_values),
      w_(capacity * num_values),
      episode_(capacity),
      priority_(capacity, 0.0),
      tree_(capacity) {
    if (capacity == 0) throw Error("ExperienceBuffer: zero capacity");
    max_priority_ = std::max(1.0, eps_per);
}

std::size_t ExperienceBuffer::add(int s, int a, std::span<const double> r, int s_next, bool done,
                                  std::span<const double> w, std::uint64_t episode) {
    const std::size_t i = head_;
    s_[i] = s;
    a_[i] = a;
    s_next_[i] = s_next;
    done_[i] = done ? 1 : 0;
    std::copy(r.begin(), r.end(), r_.begin() + static_cast<std::ptrdiff_t>(i * m_));
    std::copy(w.begin(), w.end(), w_.begin() + static_cast<std::ptrdiff_t>(i * m_));
    episode_[i] = episode;
    priority_[i] = max_priority_;
    tree_.set(i, std::pow(max_priority_, alpha_));
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
    ++insertions_;
    return i;
}

std::size_t ExperienceBuffer::recent_slot(std::size_t k) const {
    return (head_ + capacity_ - 1 - k % capacity_) % capacity_;
}

void ExperienceBuffer::set_reward(std::size_t i, std::span<const double> r) {
    std::copy(r.begin(), r.end(), r_.begin() + static_cast<std::ptrdiff_t>(i * m_));
}

void ExperienceBuffer::update_priority(std::size_t i, double td_error) {
    const double p = std::abs(td_error) + eps_;
    priority_[i] = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(i, std::pow(p, alpha_));
}

std::vector<std::size_t> ExperienceBuffer::sample_uniform(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw Error("sample from an empty buffer");
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = uniform_index(rng, size_);
    return out;
}

std::vector<std::size_t> ExperienceBuffer::sample_recent(std::size_t n, std::size_t segment, Rng& rng) const {
    if (size_ == 0) throw Error("sample from an empty buffer");
    const std::size_t seg = std::min(std::max<std::size_t>(segment, 1), size_);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = recent_slot(uniform_index(rng, seg));
    return out;
}

std::vector<std::size_t> ExperienceBuffer::sample_prioritized(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw Error("sample from an empty buffer");
    std::vector<std::size_t> out;
    out.reserve(n);
    while (out.size() < n) {
        const std::size_t i = tree_.find(uniform01(rng) * tree_.total());
        if (i < size_ && tree_.get(i) > 0.0) out.push_back(i);
    }
    return out;
}

void ExperienceBuffer::relabel(const RewardTable& rewards, int num_actions) {
    for (std::size_t i = 0; i < size_; ++i) set_reward(i, rewards.row(s_[i] * num_actions + a_[i]));
}

std::vector<std::size_t> sample_hybrid_batch(const ExperienceBuffer& buffer, std::size_t b, std::size_t recent_window,
                                             bool prioritized, Rng& rng) {
    if (buffer.size() < b) throw Error("replay buffer holds fewer transitions than one batch");
    const std::size_t n_recent = b / 2;
    auto out = buffer.sample_recent(n_recent, std::max(b, recent_window), rng);
    const auto rest = prioritized ? buffer.sample_prioritized(b - n_recent, rng) : buffer.sample_uniform(b - n_recent, rng);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

// ---------------------------------------------------------------------------
// Envelope Q-learning
// ---------------------------------------------------------------------------

std::vector<double> envelope_target(std::span<const double> r, int s_next, bool done, std::span<const double> w,
                                    const std::vector<Weights>& candidates, double gamma, const QModel& target) {
    std::vector<double> y(r.begin(), r.end());
    if (done) return y;
    if (candidates.empty()) throw Error("envelope_target: empty candidate set");
    const int A = target.num_actions();
    const auto m = static_cast<std::size_t>(target.num_values());
    std::vector<double> q(static_cast<std::size_t>(A) * m);
    std::vector<double> best_q(m);
    double best = -INFINITY;
    // Actions-major scan so ties resolve to the lowest (action, candidate) pair.
    std::vector<std::vector<double>> per_candidate;
    for (const auto& c : candidates) {
        target.evaluate_target(s_next, c, q);
        per_candidate.push_back(q);
    }
    for (int a = 0; a < A; ++a) {
        for (const auto& qc : per_candidate) {
            const std::span<const double> qa(qc.data() + static_cast<std::size_t>(a) * m, m);
            const double v = dot(w, qa);
            if (v > best) {
                best = v;
                std::copy(qa.begin(), qa.end(), best_q.begin());
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) y[i] += gamma * best_q[i];
    return y;
}

int act_epsilon_greedy(const QModel& q, int s, std::span<const double> w, double epsilon, Rng& rng) {
    if (epsilon > 0.0 && uniform01(rng) < epsilon) return static_cast<int>(uniform_index(rng, q.num_actions()));
    return q.greedy_action(s, w);
}

UpdateStats eql_update(QModel& q, ExperienceBuffer& buffer, std::span<const std::size_t> batch, double h,
                       double gamma, const EqlConfig& cfg, Rng& rng) {
    const int m = buffer.num_values();
    std::vector<Weights> sampled;
    std::vector<Weights> batch_weights;
    if (!cfg.U_w) {
        for (int k = 0; k < cfg.N_w; ++k) {
            if (q.config().mode == QMode::Tabular)
                sampled.push_back(q.grid()[uniform_index(rng, q.grid().size())]);
            else
                sampled.push_back(random_simplex_weight(rng, m));
        }
    } else {
        for (std::size_t idx : batch) {
            if (static_cast<int>(batch_weights.size()) >= cfg.N_w) break;
            const auto w = buffer.weight(idx);
            const Weights wv(w.begin(), w.end());
            if (std::find(batch_weights.begin(), batch_weights.end(), wv) == batch_weights.end())
                batch_weights.push_back(wv);
        }
    }

    const std::size_t per_item = cfg.U_w ? 1 : sampled.size();
    std::vector<double> ys(batch.size() * per_item * m);
    std::vector<double> ws(batch.size() * per_item * m);
    std::vector<QModel::Sample> samples;
    std::vector<double> td(batch.size(), 0.0);
    std::vector<double> qbuf(static_cast<std::size_t>(q.num_actions() * m));
    std::vector<Weights> candidates;

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::size_t idx = batch[b];
        const Weights own(buffer.weight(idx).begin(), buffer.weight(idx).end());
        const std::vector<Weights>* train_weights = &sampled;
        std::vector<Weights> own_only;
        if (cfg.U_w) {
            candidates = batch_weights;
            if (std::find(candidates.begin(), candidates.end(), own) == candidates.end()) candidates.push_back(own);
            own_only = {own};
            train_weights = &own_only;
        } else {
            candidates = sampled;
        }
        for (std::size_t k = 0; k < train_weights->size(); ++k) {
            const Weights& w = (*train_weights)[k];
            const auto y = envelope_target(buffer.reward(idx), buffer.next_state(idx), buffer.done(idx), w, candidates,
                                           gamma, q);
            const std::size_t off = (b * per_item + k) * m;
            std::copy(y.begin(), y.end(), ys.begin() + static_cast<std::ptrdiff_t>(off));
            std::copy(w.begin(), w.end(), ws.begin() + static_cast<std::ptrdiff_t>(off));
            samples.push_back({buffer.state(idx), buffer.action(idx), ws.data() + off, ys.data() + off});
            if (cfg.per) {
                q.evaluate(buffer.state(idx), w, qbuf);
                double sc = 0.0;
                for (int i = 0; i < m; ++i) sc += w[i] * (y[i] - qbuf[static_cast<std::size_t>(buffer.action(idx) * m + i)]);
                td[b] = std::max(td[b], std::abs(sc));
            }
        }
    }
    UpdateStats st;
    st.samples = samples.size();
    st.loss = q.train(samples, h);
    if (cfg.per)
        for (std::size_t b = 0; b < batch.size(); ++b) buffer.update_priority(batch[b], td[b]);
    return st;
}

EqlLearner::EqlLearner(const TabularMomdp& env, EqlConfig cfg, Rng& rng)
    : env_(&env),
      cfg_(std::move(cfg)),
      q_(env, cfg_.q, rng),
      buffer_(cfg_.S_e, env.num_values(), cfg_.alpha_per, cfg_.eps_per) {}

int EqlLearner::act(int s, std::span<const double> w, Rng& rng) const {
    return act_epsilon_greedy(q_, s, w, epsilon(), rng);
}

void EqlLearner::observe(int s, int a, std::span<const double> r, int s_next, bool done, std::span<const double> w,
                         std::uint64_t episode) {
    buffer_.add(s, a, r, s_next, done, w, episode);
}

UpdateStats EqlLearner::update(Rng& rng) {
    const auto b = static_cast<std::size_t>(cfg_.b_pi);
    const auto batch = cfg_.replay == ReplayMode::Uniform ? buffer_.sample_uniform(b, rng)
                                                          : sample_hybrid_batch(buffer_, b, cfg_.recent_window, cfg_.per, rng);
    return eql_update(q_, buffer_, batch, homotopy(), env_->config().discount, cfg_, rng);
}

UpdateStats EqlLearner::step(Rng& rng) {
    UpdateStats total;
    if (buffer_.size() >= static_cast<std::size_t>(cfg_.b_pi)) {
        for (int k = 0; k < cfg_.T_pi; ++k) {
            const UpdateStats st = update(rng);
            total.loss += st.loss / cfg_.T_pi;
            total.samples += st.samples;
            if (cfg_.polyak) q_.polyak(cfg_.tau);
        }
    }
    ++t_;
    if (!cfg_.polyak && cfg_.t_u > 0 && t_ % cfg_.t_u == 0) q_.sync_target();
    return total;
}

nlohmann::json EqlLearner::to_json() const {
    return {{"config", eql_config_to_json(cfg_)}, {"t", t_}, {"q", q_.to_json()}};
}

EqlLearner EqlLearner::from_json(const TabularMomdp& env, const nlohmann::json& j) {
    Rng rng(0);
    EqlLearner l(env, eql_config_from_json(j.at("config")), rng);
    l.t_ = j.at("t").get<long>();
    l.q_ = QModel::from_json(env, j.at("q"));
    return l;
}

EqlLearner train_eql(const TabularMomdp& env, const RewardTable& rewards, const EqlConfig& cfg,
                     const std::vector<Weights>& episode_weights, Rng& rng) {
    if (episode_weights.empty()) throw Error("train_eql: no episode weights");
    EqlLearner learner(env, cfg, rng);
    const int H = env.config().horizon;
    std::uint64_t episode = 0;
    int s = env.initial_state();
    int k = 0;
    Weights w = episode_weights[uniform_index(rng, episode_weights.size())];
    for (long t = 0; t < cfg.T; ++t) {
        const int a = learner.act(s, w, rng);
        const int ns = env.next_state(s, a);
        const bool done = env.terminal(ns);
        learner.observe(s, a, rewards.row(env.sa_index(s, a)), ns, done, w, episode);
        learner.step(rng);
        s = ns;
        ++k;
        if (done || k >= H) {
            ++episode;
            s = env.initial_state();
            k = 0;
            w = episode_weights[uniform_index(rng, episode_weights.size())];
        }
    }
    return learner;
}

Trajectory greedy_rollout(const TabularMomdp& env, const QModel& q, std::span<const double> w) {
    Rng unused(0);
    return rollout(env, [&](int s, int, Rng&) { return q.greedy_action(s, w); }, unused);
}

Front policy_front(const TabularMomdp& env, const QModel& q, const std::vector<Weights>& weights,
                   const RewardTable& rewards, const std::string& provenance) {
    std::vector<FrontPoint> pts;
    for (const auto& w : weights) {
        const Trajectory traj = greedy_rollout(env, q, w);
        pts.push_back({discounted_alignment(traj, rewards, env.num_actions(), env.config().discount), {w}});
    }
    Front f = pareto_filter(pts);
    f.provenance = provenance;
    return f;
}

nlohmann::json eql_config_to_json(const EqlConfig& c) {
    return {{"T", c.T},
            {"h0", c.h0},
            {"hinf", c.hinf},
            {"eps0", c.eps0},
            {"epsinf", c.epsinf},
            {"T_pi", c.T_pi},
            {"b_pi", c.b_pi},
            {"S_e", c.S_e},
            {"replay", c.replay == ReplayMode::Uniform ? "uniform" : "hybrid"},
            {"per", c.per},
            {"alpha_per", c.alpha_per},
            {"eps_per", c.eps_per},
            {"recent_window", c.recent_window},
            {"U_w", c.U_w},
            {"N_w", c.N_w},
            {"polyak", c.polyak},
            {"tau", c.tau},
            {"t_u", c.t_u},
            {"tau_or_tu", c.polyak ? c.tau : static_cast<double>(c.t_u)},
            {"q_mode", c.q.mode == QMode::Tabular ? "tabular" : "mlp"},
            {"grid_points", c.q.grid_points},
            {"q_step", c.q.q_step},
            {"alpha_eql", c.q.lr},
            {"q_hidden", c.q.hidden}};
}

EqlConfig eql_config_from_json(const nlohmann::json& j, EqlConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("T", c.T);
    get("h0", c.h0);
    get("hinf", c.hinf);
    get("eps0", c.eps0);
    get("epsinf", c.epsinf);
    get("T_pi", c.T_pi);
    get("b_pi", c.b_pi);
    get("S_e", c.S_e);
    if (j.contains("replay")) {
        const auto r = j.at("replay").get<std::string>();
        if (r != "uniform" && r != "hybrid") throw Error("unknown replay mode '" + r + "'");
        c.replay = r == "uniform" ? ReplayMode::Uniform : ReplayMode::Hybrid;
    }
    get("per", c.per);
    get("alpha_per", c.alpha_per);
    get("eps_per", c.eps_per);
    get("recent_window", c.recent_window);
    get("U_w", c.U_w);
    get("N_w", c.N_w);
    get("polyak", c.polyak);
    get("tau", c.tau);
    get("t_u", c.t_u);
    // One key for both: below 1 it is a polyak rate, otherwise a hard-sync period.
    if (j.contains("tau_or_tu")) {
        const double v = j.at("tau_or_tu").get<double>();
        if (!(v > 0.0)) throw Error("tau_or_tu must be positive");
        c.polyak = v < 1.0;
        if (c.polyak) c.tau = v;
        else c.t_u = static_cast<long>(v);
    }
    if (j.contains("q_mode")) {
        const auto m = j.at("q_mode").get<std::string>();
        if (m != "tabular" && m != "mlp") throw Error("unknown q_mode '" + m + "'");
        c.q.mode = m == "tabular" ? QMode::Tabular : QMode::Mlp;
    }
    get("grid_points", c.q.grid_points);
    get("q_step", c.q.q_step);
    get("alpha_eql", c.q.lr);
    get("q_hidden", c.q.hidden);
    return c;
}

}  // namespace svsl
