#pragma once

#include "infnote/apps/projection.hpp"
#include "infnote/chainstore/store.hpp"
#include "infnote/peernet/peer_node.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace infnote::nodekit {

using chaincore::Block;
using chaincore::ChainId;

/// Block as JSON: header fields, hex payload and signature, and `raw`, the
/// hex wire form that clients verify.
nlohmann::json block_to_json(const Block& block);

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-free direct-connect API over a full node's store.
///
///   GET  /status
///   GET  /chains
///   GET  /chains/{id}/head
///   GET  /chains/{id}/blocks/{height}
///   GET  /chains/{id}/posts?after=POST_ID&limit=N
///   GET  /chains/{id}/names/{name}
///   POST /chains/{id}/records           body: one ChainRecord
///
/// Errors are `{"error":{"code":..,"detail":..}}` with 404 for unknown chains,
/// heights and names, 400 for malformed input, 422 for a bad signature.
class ApiService {
public:
    using Submit = std::function<peernet::SubmitOutcome(const ChainId&, const std::vector<nlohmann::json>&)>;
    using StatusProvider = std::function<nlohmann::json()>;

    static constexpr std::size_t kDefaultPostLimit = 100;
    static constexpr std::size_t kMaxPostLimit = 1000;

    ApiService(chainstore::ChainStore& store, Submit submit, StatusProvider status,
               apps::SignatureCache* cache = nullptr);

    ApiResponse handle(const ApiRequest& request);

private:
    struct Projections {
        std::unique_ptr<apps::ForumProjector> forum;
        apps::IdentityProjector identity;
        std::uint64_t applied = 0;
    };

    ApiResponse chains() const;
    ApiResponse block_at(const ChainId& chain_id, std::string_view height) const;
    ApiResponse head(const ChainId& chain_id) const;
    ApiResponse posts(const ChainId& chain_id, const ApiRequest& request);
    ApiResponse name(const ChainId& chain_id, const std::string& name);
    ApiResponse submit(const ChainId& chain_id, const std::string& body);
    /// Brings the chain's projections up to the stored head.
    Result<Projections*> project(const ChainId& chain_id);

    chainstore::ChainStore& store_;
    Submit submit_;
    StatusProvider status_;
    apps::SignatureCache* cache_;
    std::mutex projections_mutex_;
    std::map<ChainId, Projections> projections_;
};

ApiResponse api_error(int status, const Error& error);

/// HTTP front end for an ApiService, with permissive CORS for browser clients.
class ApiServer {
public:
    explicit ApiServer(ApiService& service);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks one.
    Status start(const std::string& host, std::uint16_t port);
    void stop();
    std::uint16_t port() const { return port_; }

private:
    ApiService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::uint16_t port_ = 0;
};

}  // namespace infnote::nodekit
