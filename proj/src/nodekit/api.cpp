#include "infnote/nodekit/api.hpp"

#include "infnote/apps/payload.hpp"

#include <httplib.h>

#include <charconv>

namespace infnote::nodekit {

using nlohmann::json;

namespace {

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const std::size_t j = path.find('/', i);
        const std::size_t end = j == std::string_view::npos ? path.size() : j;
        if (end > i) out.emplace_back(path.substr(i, end - i));
        i = end;
    }
    return out;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

int status_for(Errc code) {
    switch (code) {
        case Errc::unknown_chain:
        case Errc::not_found: return 404;
        case Errc::bad_signature: return 422;
        case Errc::chain_banned:
        case Errc::chain_dropped: return 409;
        default: return 400;
    }
}

json post_to_json(const apps::PostEntry& entry) {
    const auto* post = entry.record.post();
    json out = {
        {"post_id", to_hex(post->post_id)},
        {"author_pub", to_hex(entry.record.author_pub)},
        {"content", post->content},
        {"client_time", post->client_time},
        {"block_height", entry.block_height},
        {"visible", entry.visible},
        {"reply_to", post->reply_to ? json(to_hex(*post->reply_to)) : json(nullptr)},
        {"record", apps::record_to_json_value(entry.record)},
    };
    return out;
}

}  // namespace

json block_to_json(const Block& block) {
    return {
        {"chain_id", block.chain_id.hex()},
        {"height", block.height},
        {"time", block.time},
        {"prev_hash", to_hex(block.prev_hash)},
        {"hash", to_hex(block.hash)},
        {"signature", to_hex(block.signature)},
        {"payload", to_hex(block.payload)},
        {"raw", chaincore::block_to_hex(block)},
    };
}

ApiResponse api_error(int status, const Error& error) {
    return {status, {{"error", {{"code", std::string(errc_name(error.code))}, {"detail", error.detail}}}}};
}

ApiService::ApiService(chainstore::ChainStore& store, Submit submit, StatusProvider status,
                       apps::SignatureCache* cache)
    : store_(store), submit_(std::move(submit)), status_(std::move(status)), cache_(cache) {}

ApiResponse ApiService::handle(const ApiRequest& request) {
    const auto parts = split_path(request.path);
    const bool get = request.method == "GET" || request.method == "HEAD";
    const auto not_found = [&] { return api_error(404, make_error(Errc::not_found, "no route for " + request.path)); };

    if (parts.size() == 1 && parts[0] == "status" && get) return {200, status_ ? status_() : json::object()};
    if (parts.empty() || parts[0] != "chains") return not_found();
    if (parts.size() == 1) return get ? chains() : not_found();

    auto chain_id = ChainId::from_hex(parts[1]);
    if (!chain_id) return api_error(400, make_error(Errc::bad_chain_id, "not a chain id: " + parts[1]));
    auto entry = store_.entry(*chain_id);
    if (!entry) return api_error(404, make_error(Errc::unknown_chain, chain_id->hex()));

    if (parts.size() == 3 && parts[2] == "records") {
        if (request.method != "POST") return not_found();
        return submit(*chain_id, request.body);
    }
    if (!get) return not_found();
    if (parts.size() == 3 && parts[2] == "head") return head(*chain_id);
    if (parts.size() == 4 && parts[2] == "blocks") return block_at(*chain_id, parts[3]);
    if (parts.size() == 3 && parts[2] == "posts") return posts(*chain_id, request);
    if (parts.size() == 4 && parts[2] == "names") return name(*chain_id, parts[3]);
    return not_found();
}

ApiResponse ApiService::chains() const {
    json list = json::array();
    for (const auto& e : store_.list_chains()) {
        auto size = store_.chain_size(e.chain_id);
        list.push_back({
            {"chain_id", e.chain_id.hex()},
            {"owner_pub", to_hex(e.owner_pub)},
            {"label", e.label},
            {"status", std::string(chainstore::status_name(e.status))},
            {"source", std::string(chainstore::source_name(e.source))},
            {"height", size && *size > 0 ? json(*size - 1) : json(nullptr)},
        });
    }
    return {200, {{"chains", list}}};
}

ApiResponse ApiService::block_at(const ChainId& chain_id, std::string_view height_text) const {
    auto height = parse_u64(height_text);
    if (!height) return api_error(400, make_error(Errc::invalid_argument, "height must be a non-negative integer"));
    auto block = store_.get_block(chain_id, *height);
    if (!block) return api_error(status_for(block.code()), block.error());
    if (!*block) return api_error(404, make_error(Errc::not_found, "no block at height " + std::to_string(*height)));
    return {200, block_to_json(**block)};
}

ApiResponse ApiService::head(const ChainId& chain_id) const {
    auto block = store_.get_head(chain_id);
    if (!block) return api_error(status_for(block.code()), block.error());
    if (!*block) return api_error(404, make_error(Errc::not_found, "chain is empty"));
    return {200, block_to_json(**block)};
}

Result<ApiService::Projections*> ApiService::project(const ChainId& chain_id) {
    auto entry = store_.entry(chain_id);
    if (!entry) return make_error(Errc::unknown_chain, chain_id.hex());
    auto size = store_.chain_size(chain_id);
    if (!size) return size.error();
    auto& p = projections_[chain_id];
    if (!p.forum) p.forum = std::make_unique<apps::ForumProjector>(entry->owner_pub, cache_);
    for (; p.applied < *size; ++p.applied) {
        auto block = store_.get_block(chain_id, p.applied);
        if (!block) return block.error();
        if (!*block) break;
        p.forum->apply(**block);
        p.identity.apply(**block);
    }
    return &p;
}

ApiResponse ApiService::posts(const ChainId& chain_id, const ApiRequest& request) {
    std::size_t limit = kDefaultPostLimit;
    if (auto it = request.query.find("limit"); it != request.query.end()) {
        auto n = parse_u64(it->second);
        if (!n || *n == 0) return api_error(400, make_error(Errc::invalid_argument, "limit must be positive"));
        limit = std::min<std::size_t>(*n, kMaxPostLimit);
    }
    std::optional<Hash256> after;
    if (auto it = request.query.find("after"); it != request.query.end() && !it->second.empty()) {
        after = array_from_hex<32>(it->second);
        if (!after) return api_error(400, make_error(Errc::invalid_argument, "after must be a post id"));
    }

    std::lock_guard lock(projections_mutex_);
    auto p = project(chain_id);
    if (!p) return api_error(status_for(p.code()), p.error());
    const auto& state = (*p)->forum->state();
    std::size_t start = 0;
    if (after) {
        auto pos = std::find(state.order.begin(), state.order.end(), *after);
        if (pos == state.order.end()) return api_error(404, make_error(Errc::not_found, "unknown post id"));
        start = static_cast<std::size_t>(pos - state.order.begin()) + 1;
    }
    json list = json::array();
    for (std::size_t i = start; i < state.order.size() && list.size() < limit; ++i)
        list.push_back(post_to_json(state.posts.at(state.order[i])));
    const bool more = start + list.size() < state.order.size();
    return {200, {{"chain_id", chain_id.hex()}, {"posts", list}, {"more", more}, {"height", (*p)->applied ? nlohmann::json((*p)->applied - 1) : nlohmann::json(nullptr)}}};
}

ApiResponse ApiService::name(const ChainId& chain_id, const std::string& name) {
    std::lock_guard lock(projections_mutex_);
    auto p = project(chain_id);
    if (!p) return api_error(status_for(p.code()), p.error());
    const auto& names = (*p)->identity.state().names;
    auto it = names.find(name);
    if (it == names.end()) return api_error(404, make_error(Errc::not_found, "name not registered: " + name));
    return {200,
            {{"name", name},
             {"pub", to_hex(it->second.pub)},
             {"block_height", it->second.block_height},
             {"profile", it->second.profile ? json(*it->second.profile) : json(nullptr)}}};
}

ApiResponse ApiService::submit(const ChainId& chain_id, const std::string& body) {
    json value;
    try {
        value = json::parse(body);
    } catch (const json::exception& e) {
        return api_error(400, make_error(Errc::bad_json, e.what()));
    }
    auto record = apps::record_from_json(value);
    if (!record) return api_error(400, record.error());
    if (auto st = apps::verify_record(*record, cache_); !st) return api_error(status_for(st.code()), st.error());
    if (!submit_) return api_error(503, make_error(Errc::not_served, "records are not accepted here"));
    auto outcome = submit_(chain_id, {apps::record_to_json_value(*record)});
    if (!outcome.rejected.empty()) {
        const auto& err = outcome.rejected.front().second;
        return api_error(status_for(err.code), err);
    }
    return {202,
            {{"status", outcome.accepted ? "accepted" : "duplicate"},
             {"record_id", to_hex(apps::record_id(*record))}}};
}

ApiServer::ApiServer(ApiService& service) : service_(service) {}

ApiServer::~ApiServer() { stop(); }

Status ApiServer::start(const std::string& host, std::uint16_t port) {
    server_ = std::make_unique<httplib::Server>();
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest request{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) request.query[k] = v;
        auto response = service_.handle(request);
        res.status = response.status;
        res.set_content(response.body.dump(), "application/json");
    };
    server_->Get(".*", dispatch);
    server_->Post(".*", dispatch);
    server_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    int bound = 0;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
    } else {
        bound = server_->bind_to_port(host, port) ? port : -1;
    }
    if (bound <= 0) {
        server_.reset();
        return make_error(Errc::bind_failed, "api " + host + ":" + std::to_string(port));
    }
    port_ = static_cast<std::uint16_t>(bound);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return {};
}

void ApiServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

}  // namespace infnote::nodekit
