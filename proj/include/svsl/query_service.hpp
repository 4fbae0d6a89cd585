#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "svsl/orchestrator.hpp"

namespace svsl {

/// Failure carrying the HTTP status it maps to.
class ServiceError : public Error {
public:
    ServiceError(int status, const std::string& what) : Error(what), status(status) {}
    int status;
};

struct QueryServiceConfig {
    /// Accepted bearer tokens; empty disables the check.
    std::vector<std::string> tokens;
    std::string cors_origin = "*";
    /// A served query not answered within this many seconds is served again.
    double inflight_seconds = 120.0;
    /// How long a collection round waits for human answers before dropping the rest.
    double round_timeout_seconds = 600.0;
    /// Agents answered through the service; every other agent uses the oracle.
    std::vector<int> human_agents;
};

nlohmann::json query_service_config_to_json(const QueryServiceConfig& c);
QueryServiceConfig query_service_config_from_json(const nlohmann::json& j, QueryServiceConfig base = {});

/// Shared state between the HTTP handlers and the orchestrator. Every method
/// is thread-safe. Accepted labels wait in a queue until `drain` hands them to
/// the orchestrator, each exactly once.
class QueryHub {
public:
    using Clock = std::function<double()>;

    /// `clock` returns seconds; defaults to a steady clock.
    QueryHub(const TabularMomdp& env, int num_agents, Clock clock = {});

    // Orchestrator side.
    void publish(const std::vector<QueryItem>& items);
    std::vector<PreferenceRecord> drain();
    /// Blocks until no published query is open or `timeout_seconds` elapse.
    /// Returns true when everything was answered.
    bool wait_until_answered(double timeout_seconds);
    /// Closes every open query; late submissions for them are rejected.
    std::size_t drop_open();
    std::size_t open_count() const;
    void update_status(const RunStatus& status);
    void set_human_agents(std::vector<int> agents);
    void set_inflight_seconds(double seconds);

    // HTTP side.
    nlohmann::json agents() const;
    /// Oldest pending query for `agent` (or an in-flight one past its deadline); none when idle.
    std::optional<nlohmann::json> next_query(int agent);
    nlohmann::json submit(const nlohmann::json& body, const std::string& labeler);
    nlohmann::json status() const;

    bool was_answered(std::uint64_t id) const;
    std::size_t accepted_total() const;
    std::size_t drained_total() const;

private:
    enum class State { Pending, InFlight, Answered, Dropped };
    struct Entry {
        QueryItem item;
        State state = State::Pending;
        double deadline = 0.0;
    };

    nlohmann::json payload(const Entry& e) const;
    nlohmann::json trajectory_json(const TrajectoryData& traj) const;

    const TabularMomdp* env_;
    int num_agents_;
    Clock clock_;
    std::string env_hash_;
    double inflight_seconds_ = 120.0;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::uint64_t, Entry> entries_;
    std::vector<std::deque<std::uint64_t>> per_agent_;
    std::deque<PreferenceRecord> accepted_;
    std::set<int> human_;
    std::size_t open_ = 0;
    std::size_t accepted_total_ = 0;
    std::size_t drained_total_ = 0;
    std::size_t dropped_total_ = 0;
    RunStatus status_;

    friend class QueryServer;
};

/// HTTP/JSON front end of a hub: GET /api/agents, GET /api/agents/{id}/queries/next,
/// POST /api/labels and GET /api/status, with CORS and static bearer tokens.
class QueryServer {
public:
    QueryServer(QueryHub& hub, QueryServiceConfig cfg);
    ~QueryServer();
    QueryServer(const QueryServer&) = delete;
    QueryServer& operator=(const QueryServer&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port. Returns the port.
    int start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
    int port_ = 0;
};

/// Routes human-backed agents through the hub and answers the rest with the
/// oracle. Queries still open after the round timeout are dropped and logged.
class ServiceAnswerSource : public AnswerSource {
public:
    ServiceAnswerSource(QueryHub& hub, OracleAnswerSource oracle, std::vector<int> human_agents,
                        double round_timeout_seconds);
    std::vector<PreferenceRecord> collect(QuerySet& queries) override;

    std::size_t dropped_total() const { return dropped_total_; }

private:
    QueryHub& hub_;
    OracleAnswerSource oracle_;
    std::set<int> human_;
    double timeout_;
    std::size_t dropped_total_ = 0;
};

}  // namespace svsl
