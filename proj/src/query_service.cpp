#include "svsl/query_service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <httplib.h>

#include "svsl/society.hpp"

namespace svsl {

nlohmann::json query_service_config_to_json(const QueryServiceConfig& c) {
    return {{"tokens", c.tokens},
            {"cors_origin", c.cors_origin},
            {"inflight_seconds", c.inflight_seconds},
            {"round_timeout_seconds", c.round_timeout_seconds},
            {"human_agents", c.human_agents}};
}

QueryServiceConfig query_service_config_from_json(const nlohmann::json& j, QueryServiceConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("tokens", c.tokens);
    get("cors_origin", c.cors_origin);
    get("inflight_seconds", c.inflight_seconds);
    get("round_timeout_seconds", c.round_timeout_seconds);
    get("human_agents", c.human_agents);
    if (c.inflight_seconds <= 0 || c.round_timeout_seconds < 0) throw Error("query service timeouts must be positive");
    return c;
}

// ---------------------------------------------------------------------------
// Hub
// ---------------------------------------------------------------------------

namespace {

double steady_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

Preference parse_label(const nlohmann::json& v, const char* field) {
    if (!v.is_number()) throw ServiceError(400, std::string(field) + " must be 0, 0.5 or 1");
    const double y = v.get<double>();
    if (y != 0.0 && y != 0.5 && y != 1.0) throw ServiceError(400, std::string(field) + " must be 0, 0.5 or 1");
    return preference_from_value(y);
}

}  // namespace

QueryHub::QueryHub(const TabularMomdp& env, int num_agents, Clock clock)
    : env_(&env),
      num_agents_(num_agents),
      clock_(clock ? std::move(clock) : Clock(steady_seconds)),
      env_hash_(env_hash(env)),
      per_agent_(static_cast<std::size_t>(num_agents)) {
    if (num_agents <= 0) throw Error("QueryHub needs at least one agent");
}

void QueryHub::publish(const std::vector<QueryItem>& items) {
    std::lock_guard lock(mu_);
    for (const auto& q : items) {
        if (q.agent < 0 || q.agent >= num_agents_) throw Error("query for unknown agent");
        if (entries_.count(q.id)) throw Error("query id published twice");
        entries_[q.id] = Entry{q, State::Pending, 0.0};
        per_agent_[static_cast<std::size_t>(q.agent)].push_back(q.id);
        ++open_;
    }
    status_.queries_asked += items.size();
}

std::vector<PreferenceRecord> QueryHub::drain() {
    std::lock_guard lock(mu_);
    std::vector<PreferenceRecord> out(std::make_move_iterator(accepted_.begin()), std::make_move_iterator(accepted_.end()));
    accepted_.clear();
    drained_total_ += out.size();
    return out;
}

bool QueryHub::wait_until_answered(double timeout_seconds) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, std::chrono::duration<double>(timeout_seconds), [&] { return open_ == 0; });
}

std::size_t QueryHub::drop_open() {
    std::lock_guard lock(mu_);
    std::size_t dropped = 0;
    for (auto& [id, e] : entries_) {
        if (e.state == State::Pending || e.state == State::InFlight) {
            e.state = State::Dropped;
            ++dropped;
        }
    }
    for (auto& q : per_agent_) q.clear();
    open_ = 0;
    dropped_total_ += dropped;
    return dropped;
}

std::size_t QueryHub::open_count() const {
    std::lock_guard lock(mu_);
    return open_;
}

void QueryHub::update_status(const RunStatus& status) {
    std::lock_guard lock(mu_);
    const std::size_t asked = status_.queries_asked;
    status_ = status;
    status_.queries_asked = std::max(asked, status.queries_asked);
}

void QueryHub::set_human_agents(std::vector<int> agents) {
    std::lock_guard lock(mu_);
    human_ = std::set<int>(agents.begin(), agents.end());
}

void QueryHub::set_inflight_seconds(double seconds) {
    if (!(seconds > 0)) throw Error("in-flight window must be positive");
    std::lock_guard lock(mu_);
    inflight_seconds_ = seconds;
}

nlohmann::json QueryHub::agents() const {
    std::lock_guard lock(mu_);
    nlohmann::json out = nlohmann::json::array();
    for (int j = 0; j < num_agents_; ++j) {
        std::size_t pending = 0;
        for (auto id : per_agent_[static_cast<std::size_t>(j)]) {
            const auto& e = entries_.at(id);
            if (e.state == State::Pending || e.state == State::InFlight) ++pending;
        }
        out.push_back({{"id", j}, {"human", human_.count(j) > 0}, {"pending", pending}});
    }
    return out;
}

nlohmann::json QueryHub::trajectory_json(const TrajectoryData& traj) const {
    nlohmann::json steps = nlohmann::json::array();
    int t = 0;
    for (const auto& st : traj.trajectory.steps) {
        nlohmann::json fields = nlohmann::json::object();
        if (env_->state_fields)
            for (const auto& [name, value] : env_->state_fields(st.state)) fields[name] = value;
        steps.push_back({{"t", t++},
                         {"state", st.state},
                         {"state_fields", fields},
                         {"state_text", env_->describe_state(st.state)},
                         {"action", st.action},
                         {"action_name", env_->describe_action(st.action)}});
    }
    std::string reason = "horizon";
    if (!traj.trajectory.empty()) {
        const auto& last = traj.trajectory.steps.back();
        if (env_->terminal(env_->next_state(last.state, last.action))) reason = "terminal";
    }
    return {{"length", traj.trajectory.size()}, {"terminal_reason", reason}, {"steps", steps}};
}

nlohmann::json QueryHub::payload(const Entry& e) const {
    nlohmann::json prompts = nlohmann::json::array();
    for (const auto& name : env_->value_names)
        prompts.push_back({{"value", name}, {"prompt", "Which trajectory is more aligned with " + name + "?"}});
    return {{"query_id", e.item.id},
            {"agent", e.item.agent},
            {"env_hash", env_hash_},
            {"first", trajectory_json(*e.item.first)},
            {"second", trajectory_json(*e.item.second)},
            {"value_prompts", prompts},
            {"value_system_prompt", "Overall, which trajectory do you prefer?"},
            {"labels", {{"first", 1}, {"indifferent", 0.5}, {"second", 0}}},
            {"deadline", e.deadline}};
}

std::optional<nlohmann::json> QueryHub::next_query(int agent) {
    std::lock_guard lock(mu_);
    if (agent < 0 || agent >= num_agents_) throw ServiceError(404, "unknown agent " + std::to_string(agent));
    const double now = clock_();
    for (auto id : per_agent_[static_cast<std::size_t>(agent)]) {
        Entry& e = entries_.at(id);
        const bool expired = e.state == State::InFlight && now >= e.deadline;
        if (e.state == State::Pending || expired) {
            e.state = State::InFlight;
            e.deadline = now + inflight_seconds_;
            return payload(e);
        }
    }
    return std::nullopt;
}

nlohmann::json QueryHub::submit(const nlohmann::json& body, const std::string& labeler) {
    if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
    if (!body.contains("query_id") || !body.at("query_id").is_number_unsigned())
        throw ServiceError(400, "query_id is required");
    if (!body.contains("y_vs")) throw ServiceError(400, "y_vs is required");
    if (!body.contains("y_values") || !body.at("y_values").is_array()) throw ServiceError(400, "y_values is required");
    const auto id = body.at("query_id").get<std::uint64_t>();
    const Preference y_vs = parse_label(body.at("y_vs"), "y_vs");
    const auto& yv = body.at("y_values");
    if (static_cast<int>(yv.size()) != env_->num_values())
        throw ServiceError(400, "y_values must have " + std::to_string(env_->num_values()) + " entries");
    std::vector<Preference> values;
    for (const auto& v : yv) values.push_back(parse_label(v, "y_values"));

    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) throw ServiceError(404, "unknown query " + std::to_string(id));
    Entry& e = it->second;
    if (body.contains("agent") && body.at("agent") != e.item.agent)
        throw ServiceError(400, "query " + std::to_string(id) + " belongs to another agent");
    switch (e.state) {
        case State::Answered: throw ServiceError(409, "query " + std::to_string(id) + " was already answered");
        case State::Dropped: throw ServiceError(409, "query " + std::to_string(id) + " is closed");
        case State::Pending: throw ServiceError(409, "query " + std::to_string(id) + " has not been served");
        case State::InFlight: break;
    }
    e.state = State::Answered;
    PreferenceRecord r;
    r.first = e.item.first;
    r.second = e.item.second;
    r.value_system = y_vs;
    r.values = std::move(values);
    r.agent = e.item.agent;
    accepted_.push_back(std::move(r));
    ++accepted_total_;
    auto& q = per_agent_[static_cast<std::size_t>(e.item.agent)];
    q.erase(std::remove(q.begin(), q.end(), id), q.end());
    --open_;
    if (open_ == 0) cv_.notify_all();
    (void)labeler;
    return {{"accepted", true}, {"query_id", id}, {"agent", e.item.agent}};
}

nlohmann::json QueryHub::status() const {
    std::lock_guard lock(mu_);
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : status_.live_weights) weights.push_back(w);
    return {{"t", status_.t},
            {"T", status_.T},
            {"pending", open_},
            {"answered", accepted_total_},
            {"consumed", drained_total_},
            {"dropped", dropped_total_},
            {"queries_asked", status_.queries_asked},
            {"buffer_records", status_.buffer_records},
            {"num_clusters", status_.num_clusters},
            {"cluster_weights", weights},
            {"metrics", status_.metrics}};
}

bool QueryHub::was_answered(std::uint64_t id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    return it != entries_.end() && it->second.state == State::Answered;
}

std::size_t QueryHub::accepted_total() const {
    std::lock_guard lock(mu_);
    return accepted_total_;
}

std::size_t QueryHub::drained_total() const {
    std::lock_guard lock(mu_);
    return drained_total_;
}

// ---------------------------------------------------------------------------
// HTTP server
// ---------------------------------------------------------------------------

struct QueryServer::Impl {
    QueryHub& hub;
    QueryServiceConfig cfg;
    httplib::Server server;

    Impl(QueryHub& h, QueryServiceConfig c) : hub(h), cfg(std::move(c)) {}

    void cors(httplib::Response& res) const {
        res.set_header("Access-Control-Allow-Origin", cfg.cors_origin);
        res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }

    /// Returns the token, or throws 401.
    std::string authorize(const httplib::Request& req) const {
        if (cfg.tokens.empty()) return {};
        const auto header = req.get_header_value("Authorization");
        const std::string prefix = "Bearer ";
        if (header.rfind(prefix, 0) == 0) {
            const auto token = header.substr(prefix.size());
            if (std::find(cfg.tokens.begin(), cfg.tokens.end(), token) != cfg.tokens.end()) return token;
        }
        throw ServiceError(401, "missing or invalid bearer token");
    }

    template <typename F>
    httplib::Server::Handler wrap(F&& f) {
        return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
            cors(res);
            try {
                const auto token = authorize(req);
                f(req, res, token);
            } catch (const ServiceError& e) {
                res.status = e.status;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            } catch (const nlohmann::json::exception& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", std::string("malformed JSON: ") + e.what()}}.dump(),
                                "application/json");
            } catch (const std::exception& e) {
                res.status = 500;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            }
        };
    }

    static void json_reply(httplib::Response& res, const nlohmann::json& j) {
        res.status = 200;
        res.set_content(j.dump(), "application/json");
    }

    void routes() {
        server.Options(R"(/api/.*)", [this](const httplib::Request&, httplib::Response& res) {
            cors(res);
            res.status = 204;
        });
        server.Get("/api/agents", wrap([this](const httplib::Request&, httplib::Response& res, const std::string&) {
                       json_reply(res, hub.agents());
                   }));
        server.Get(R"(/api/agents/(\d+)/queries/next)",
                   wrap([this](const httplib::Request& req, httplib::Response& res, const std::string&) {
                       int agent = -1;
                       try {
                           agent = std::stoi(req.matches[1].str());
                       } catch (const std::exception&) {
                           throw ServiceError(404, "unknown agent");
                       }
                       auto q = hub.next_query(agent);
                       if (!q) {
                           res.status = 204;
                           return;
                       }
                       json_reply(res, *q);
                   }));
        server.Post("/api/labels",
                    wrap([this](const httplib::Request& req, httplib::Response& res, const std::string& token) {
                        json_reply(res, hub.submit(nlohmann::json::parse(req.body), token));
                    }));
        server.Get("/api/status", wrap([this](const httplib::Request&, httplib::Response& res, const std::string&) {
                       json_reply(res, hub.status());
                   }));
    }
};

QueryServer::QueryServer(QueryHub& hub, QueryServiceConfig cfg) : impl_(std::make_unique<Impl>(hub, std::move(cfg))) {
    impl_->routes();
}

QueryServer::~QueryServer() { stop(); }

int QueryServer::start(const std::string& host, int port) {
    if (thread_.joinable()) throw Error("query server already running");
    port_ = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void QueryServer::stop() {
    if (!thread_.joinable()) return;
    impl_->server.stop();
    thread_.join();
}

// ---------------------------------------------------------------------------

ServiceAnswerSource::ServiceAnswerSource(QueryHub& hub, OracleAnswerSource oracle, std::vector<int> human_agents,
                                         double round_timeout_seconds)
    : hub_(hub),
      oracle_(std::move(oracle)),
      human_(human_agents.begin(), human_agents.end()),
      timeout_(round_timeout_seconds) {
    hub_.set_human_agents(std::move(human_agents));
}

std::vector<PreferenceRecord> ServiceAnswerSource::collect(QuerySet& queries) {
    std::vector<PreferenceRecord> out;
    std::vector<QueryItem> routed;
    for (auto& q : queries.items) {
        if (human_.count(q.agent)) {
            routed.push_back(q);
        } else {
            out.push_back(oracle_.answer(q));
            q.status = QueryStatus::Answered;
        }
    }
    if (!routed.empty()) {
        hub_.publish(routed);
        if (!hub_.wait_until_answered(timeout_)) {
            const std::size_t dropped = hub_.drop_open();
            dropped_total_ += dropped;
            log::warn("collection round timed out; " + std::to_string(dropped) + " unanswered queries dropped");
        }
        for (auto& r : hub_.drain()) out.push_back(std::move(r));
        for (auto& q : queries.items)
            if (human_.count(q.agent)) q.status = hub_.was_answered(q.id) ? QueryStatus::Answered : QueryStatus::Dropped;
    }
    return out;
}

}  // namespace svsl
