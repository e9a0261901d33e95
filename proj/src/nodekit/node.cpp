#include "infnote/nodekit/node.hpp"

#include "infnote/peernet/bootstrap.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/ssl.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <future>
#include <thread>

namespace infnote::nodekit {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace ssl = net::ssl;
using tcp = net::ip::tcp;
using peernet::SessionId;

namespace {

constexpr auto kConnectTimeout = std::chrono::seconds(10);
constexpr auto kDialWait = std::chrono::seconds(20);

std::uint64_t unix_seconds() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

std::uint64_t monotonic_ms() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now().time_since_epoch())
                                          .count());
}

bool offers_subprotocol(std::string_view header) {
    std::size_t i = 0;
    while (i <= header.size()) {
        std::size_t j = header.find(',', i);
        if (j == std::string_view::npos) j = header.size();
        auto token = header.substr(i, j - i);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (token == wire::kSubprotocol) return true;
        i = j + 1;
    }
    return false;
}

/// SOCKS5 CONNECT without authentication, by hostname.
net::awaitable<void> socks5_connect(beast::tcp_stream& stream, const std::string& host, std::uint16_t port) {
    if (host.size() > 255) throw std::runtime_error("hostname too long for SOCKS5");
    std::array<std::uint8_t, 3> greeting{0x05, 0x01, 0x00};
    co_await net::async_write(stream, net::buffer(greeting), net::use_awaitable);
    std::array<std::uint8_t, 2> choice{};
    co_await net::async_read(stream, net::buffer(choice), net::use_awaitable);
    if (choice[0] != 0x05 || choice[1] != 0x00) throw std::runtime_error("proxy refused no-auth SOCKS5");

    Bytes request{0x05, 0x01, 0x00, 0x03, static_cast<std::uint8_t>(host.size())};
    request.insert(request.end(), host.begin(), host.end());
    request.push_back(static_cast<std::uint8_t>(port >> 8));
    request.push_back(static_cast<std::uint8_t>(port & 0xff));
    co_await net::async_write(stream, net::buffer(request), net::use_awaitable);

    std::array<std::uint8_t, 4> head{};
    co_await net::async_read(stream, net::buffer(head), net::use_awaitable);
    if (head[0] != 0x05 || head[1] != 0x00) throw std::runtime_error("proxy CONNECT failed");
    std::size_t rest = 0;
    switch (head[3]) {
        case 0x01: rest = 4; break;
        case 0x04: rest = 16; break;
        case 0x03: {
            std::array<std::uint8_t, 1> len{};
            co_await net::async_read(stream, net::buffer(len), net::use_awaitable);
            rest = len[0];
            break;
        }
        default: throw std::runtime_error("proxy reply has an unknown address type");
    }
    Bytes bound(rest + 2);
    co_await net::async_read(stream, net::buffer(bound), net::use_awaitable);
}

}  // namespace

/// One open WebSocket, plain or TLS. Methods run on the io thread.
class SessionBase {
public:
    virtual ~SessionBase() = default;
    virtual SessionId id() const = 0;
    virtual void send(std::string text) = 0;
    virtual void close() = 0;
    virtual void abort() = 0;
};

struct Node::Impl : peernet::PeerTransport {
    explicit Impl(NodeConfig c)
        : config(std::move(c)), work(net::make_work_guard(ioc)), acceptor(ioc), tls_client(ssl::context::tls_client) {}

    // PeerTransport: called with node_mutex held, from any thread.
    void send(SessionId session, const wire::Message& message) override;
    void close(SessionId session) override;

    Status open_storage();
    Status load_tls();
    Status bind();
    void start_threads();
    void shutdown();

    net::awaitable<void> accept_loop();
    net::awaitable<void> handle_inbound(tcp::socket socket);
    template <class Next>
    net::awaitable<void> upgrade_inbound(Next stream, beast::flat_buffer buffer, tcp::endpoint endpoint);
    net::awaitable<bool> connect_out(PeerAddress address);
    template <class Next>
    net::awaitable<bool> finish_outbound(Next stream, PeerAddress address);
    net::awaitable<void> produce_loop();
    void produce_tick();
    void bootstrap_loop();
    bool dial(const PeerAddress& address);
    /// False once shutdown began; the caller must drop the session.
    bool adopt(std::shared_ptr<SessionBase> session);
    void session_closed(SessionId id);
    NodeStatus status();

    NodeConfig config;
    std::unique_ptr<chainstore::ChainStore> store;
    std::unique_ptr<LightCache> cache;
    std::unique_ptr<peernet::StoreLedger> store_ledger;
    peernet::BlockLedger* ledger = nullptr;
    peernet::AddressBook book;
    std::filesystem::path book_path;
    apps::SignatureCache signatures;
    std::unique_ptr<BlockProducer> producer;

    mutable std::mutex node_mutex;
    std::unique_ptr<peernet::PeerNode> peer;

    net::io_context ioc;
    net::executor_work_guard<net::io_context::executor_type> work;
    tcp::acceptor acceptor;
    std::optional<ssl::context> tls_server;
    ssl::context tls_client;
    std::uint16_t p2p_port = 0;
    std::thread io_thread;
    std::thread bootstrap_thread;
    std::atomic<SessionId> next_session{1};
    /// Only touched on the io thread.
    std::map<SessionId, std::shared_ptr<SessionBase>> sessions;
    std::atomic<std::size_t> open_sessions{0};
    /// Set on the io thread when shutdown sweeps the sessions.
    bool draining = false;

    std::unique_ptr<ApiService> api;
    std::unique_ptr<ApiServer> api_server;

    std::mutex stop_mutex;
    std::condition_variable stop_cv;
    bool stopping = false;
    bool stopped = false;
};

template <class Next>
class WsSession : public SessionBase, public std::enable_shared_from_this<WsSession<Next>> {
public:
    using Stream = websocket::stream<Next>;

    WsSession(Node::Impl& node, Stream stream, SessionId id, bool outbound, PeerAddress remote)
        : node_(node), ws_(std::move(stream)), id_(id), outbound_(outbound), remote_(std::move(remote)) {}

    SessionId id() const override { return id_; }

    void begin() {
        if (!node_.adopt(this->shared_from_this())) {
            closed_ = true;
            abort();
            return;
        }
        {
            std::lock_guard lock(node_.node_mutex);
            node_.peer->on_session_open(id_, outbound_, remote_);
        }
        net::co_spawn(ws_.get_executor(), read_loop(this->shared_from_this()), net::detached);
    }

    void send(std::string text) override {
        if (closed_ || closing_) return;
        queue_.push_back(std::move(text));
        if (!writing_) net::co_spawn(ws_.get_executor(), write_loop(this->shared_from_this()), net::detached);
    }

    /// Graceful close once queued frames are out.
    void close() override {
        if (closed_ || closing_) return;
        closing_ = true;
        if (!writing_) net::co_spawn(ws_.get_executor(), write_loop(this->shared_from_this()), net::detached);
    }

    void abort() override {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    static net::awaitable<void> read_loop(std::shared_ptr<WsSession> self) {
        beast::flat_buffer buffer;
        for (;;) {
            beast::error_code ec;
            co_await self->ws_.async_read(buffer, net::redirect_error(net::use_awaitable, ec));
            if (ec) break;
            if (!self->ws_.got_text()) {
                buffer.consume(buffer.size());
                continue;
            }
            std::string text = beast::buffers_to_string(buffer.data());
            buffer.consume(buffer.size());
            std::lock_guard lock(self->node_.node_mutex);
            self->node_.peer->on_frame(self->id_, text);
        }
        self->finish();
    }

    static net::awaitable<void> write_loop(std::shared_ptr<WsSession> self) {
        self->writing_ = true;
        while (!self->queue_.empty()) {
            beast::error_code ec;
            self->ws_.text(true);
            co_await self->ws_.async_write(net::buffer(self->queue_.front()),
                                           net::redirect_error(net::use_awaitable, ec));
            self->queue_.pop_front();
            if (ec) {
                self->queue_.clear();
                self->writing_ = false;
                self->abort();
                co_return;
            }
        }
        self->writing_ = false;
        if (self->closing_ && !self->closed_) {
            beast::error_code ec;
            co_await self->ws_.async_close(websocket::close_code::normal, net::redirect_error(net::use_awaitable, ec));
            if (ec) self->abort();
        }
    }

    void finish() {
        if (closed_) return;
        closed_ = true;
        queue_.clear();
        abort();
        node_.session_closed(id_);
    }

    Node::Impl& node_;
    Stream ws_;
    SessionId id_;
    bool outbound_;
    PeerAddress remote_;
    std::deque<std::string> queue_;
    bool writing_ = false;
    bool closing_ = false;
    bool closed_ = false;
};

void Node::Impl::send(SessionId session, const wire::Message& message) {
    net::post(ioc, [this, session, text = wire::encode_message(message)]() mutable {
        if (auto it = sessions.find(session); it != sessions.end()) it->second->send(std::move(text));
    });
}

void Node::Impl::close(SessionId session) {
    net::post(ioc, [this, session] {
        if (auto it = sessions.find(session); it != sessions.end()) it->second->close();
    });
}

bool Node::Impl::adopt(std::shared_ptr<SessionBase> session) {
    if (draining) return false;
    sessions[session->id()] = std::move(session);
    ++open_sessions;
    return true;
}

void Node::Impl::session_closed(SessionId id) {
    if (sessions.erase(id)) --open_sessions;
    std::lock_guard lock(node_mutex);
    peer->on_session_closed(id);
}

Status Node::Impl::open_storage() {
    if (auto st = config.validate(); !st) return st;
    std::error_code ec;
    std::filesystem::create_directories(config.data_dir, ec);
    if (ec) return make_error(Errc::io_error, "cannot create " + config.data_dir.string());

    std::vector<chainstore::ChainRegistryEntry> registry;
    if (config.kind == NodeKind::full) {
        auto opened = chainstore::ChainStore::open(config.data_dir, config.default_list);
        if (!opened) return opened.error();
        store = std::move(*opened);
        for (const auto& spec : config.follow) {
            if (store->entry(spec.chain_id)) continue;
            if (!spec.owner_pub)
                return make_error(Errc::invalid_argument,
                                  "follow " + spec.chain_id.hex() + ": full nodes need the owner key");
            chainstore::ChainRegistryEntry e;
            e.chain_id = spec.chain_id;
            e.owner_pub = *spec.owner_pub;
            e.label = "followed";
            if (auto st = store->follow_chain(e); !st) return st;
        }
        if (config.owner_keys) {
            auto chain_id = chaincore::derive_chain_id(config.owner_keys->public_key);
            if (!chain_id) return chain_id.error();
            if (!store->entry(*chain_id)) {
                chainstore::ChainRegistryEntry e;
                e.chain_id = *chain_id;
                e.owner_pub = config.owner_keys->public_key;
                e.label = "own";
                if (auto st = store->follow_chain(e); !st) return st;
            }
            auto size = store->chain_size(*chain_id);
            if (!size) return size.error();
            if (*size == 0) {
                auto genesis = chaincore::make_genesis(*config.owner_keys, store->entry(*chain_id)->label, unix_seconds());
                if (!genesis) return genesis.error();
                if (auto out = store->append_block(*genesis); !out) return out.error();
            }
            producer = std::make_unique<BlockProducer>(*config.owner_keys, config.producer);
        }
        store_ledger = std::make_unique<peernet::StoreLedger>(*store);
        ledger = store_ledger.get();
    } else {
        cache = std::make_unique<LightCache>(config.cache_depth);
        auto list = config.default_list;
        if (!list && std::filesystem::exists(config.data_dir / "defaults.list")) list = config.data_dir / "defaults.list";
        if (list) {
            auto entries = chainstore::read_registry_file(*list);
            if (!entries) return entries.error();
            registry = std::move(*entries);
        }
        for (const auto& e : registry)
            if (auto st = cache->follow(e.chain_id, e.owner_pub); !st) return st;
        for (const auto& spec : config.follow) {
            auto pub = spec.owner_pub;
            for (const auto& e : registry)
                if (!pub && e.chain_id == spec.chain_id) pub = e.owner_pub;
            if (auto st = cache->follow(spec.chain_id, pub); !st) return st;
        }
        ledger = cache.get();
    }

    book_path = config.address_book_path ? *config.address_book_path : config.data_dir / "peers.txt";
    if (auto loaded = peernet::AddressBook::load(book_path); loaded) book = std::move(*loaded);

    peernet::PeerNodeConfig pc = config.peer;
    pc.kind = config.kind;
    peer = std::make_unique<peernet::PeerNode>(pc, *ledger, *this, &book, &signatures);
    return {};
}

Status Node::Impl::load_tls() {
    tls_client.set_verify_mode(ssl::verify_none);
    if (!config.tls_cert) return {};
    ssl::context ctx(ssl::context::tls_server);
    beast::error_code ec;
    ctx.set_options(ssl::context::default_workarounds | ssl::context::no_sslv2 | ssl::context::no_sslv3 |
                    ssl::context::no_tlsv1 | ssl::context::no_tlsv1_1);
    ctx.use_certificate_chain_file(config.tls_cert->string(), ec);
    if (ec) return make_error(Errc::invalid_argument, "tls_cert " + config.tls_cert->string() + ": " + ec.message());
    ctx.use_private_key_file(config.tls_key->string(), ssl::context::pem, ec);
    if (ec) return make_error(Errc::invalid_argument, "tls_key " + config.tls_key->string() + ": " + ec.message());
    tls_server.emplace(std::move(ctx));
    return {};
}

Status Node::Impl::bind() {
    beast::error_code ec;
    auto address = net::ip::make_address(config.listen_host, ec);
    if (ec) return make_error(Errc::bind_failed, "bad listen host " + config.listen_host);
    tcp::endpoint endpoint(address, config.listen_port);
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec)
        return make_error(Errc::bind_failed,
                          config.listen_host + ":" + std::to_string(config.listen_port) + ": " + ec.message());
    p2p_port = acceptor.local_endpoint().port();
    std::lock_guard lock(node_mutex);
    peernet::PeerNodeConfig pc = peer->config();
    if (!pc.listen_port) {
        pc.listen_port = p2p_port;
        peer = std::make_unique<peernet::PeerNode>(pc, *ledger, *this, &book, &signatures);
    }
    return {};
}

net::awaitable<void> Node::Impl::accept_loop() {
    for (;;) {
        beast::error_code ec;
        tcp::socket socket = co_await acceptor.async_accept(net::redirect_error(net::use_awaitable, ec));
        if (ec == net::error::operation_aborted || !acceptor.is_open()) co_return;
        if (ec) continue;
        net::co_spawn(ioc, handle_inbound(std::move(socket)), net::detached);
    }
}

net::awaitable<void> Node::Impl::handle_inbound(tcp::socket socket) {
    beast::error_code ec;
    const auto endpoint = socket.remote_endpoint(ec);
    if (ec) co_return;
    beast::tcp_stream stream(std::move(socket));
    stream.expires_after(kConnectTimeout);
    beast::flat_buffer buffer;
    // Plain and TLS clients share the port; the first bytes tell them apart.
    const bool is_tls = co_await beast::async_detect_ssl(stream, buffer, net::redirect_error(net::use_awaitable, ec));
    if (ec) co_return;
    if (!is_tls) {
        co_await upgrade_inbound(std::move(stream), std::move(buffer), endpoint);
        co_return;
    }
    if (!tls_server) co_return;
    ssl::stream<beast::tcp_stream> secure(std::move(stream), *tls_server);
    const std::size_t used = co_await secure.async_handshake(ssl::stream_base::server, buffer.data(),
                                                             net::redirect_error(net::use_awaitable, ec));
    if (ec) co_return;
    buffer.consume(used);
    co_await upgrade_inbound(std::move(secure), std::move(buffer), endpoint);
}

template <class Next>
net::awaitable<void> Node::Impl::upgrade_inbound(Next stream, beast::flat_buffer buffer, tcp::endpoint endpoint) {
    beast::error_code ec;
    http::request<http::string_body> request;
    co_await http::async_read(stream, buffer, request, net::redirect_error(net::use_awaitable, ec));
    if (ec) co_return;

    if (!websocket::is_upgrade(request) ||
        !offers_subprotocol(std::string(request[http::field::sec_websocket_protocol]))) {
        http::response<http::string_body> response{http::status::bad_request, request.version()};
        response.set(http::field::content_type, "text/plain");
        response.body() = "expected a WebSocket upgrade with subprotocol infnote/1\n";
        response.prepare_payload();
        co_await http::async_write(stream, response, net::redirect_error(net::use_awaitable, ec));
        co_return;
    }

    typename WsSession<Next>::Stream ws(std::move(stream));
    beast::get_lowest_layer(ws).expires_never();
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws.set_option(websocket::stream_base::decorator(
        [](websocket::response_type& res) { res.set(http::field::sec_websocket_protocol, std::string(wire::kSubprotocol)); }));
    ws.read_message_max(wire::kMaxFrameBytes);
    co_await ws.async_accept(request, net::redirect_error(net::use_awaitable, ec));
    if (ec) co_return;

    PeerAddress remote{endpoint.address().to_string(), endpoint.port(), 0, 0};
    std::make_shared<WsSession<Next>>(*this, std::move(ws), next_session++, false, remote)->begin();
}

net::awaitable<bool> Node::Impl::connect_out(PeerAddress address) {
    try {
        auto executor = co_await net::this_coro::executor;
        tcp::resolver resolver(executor);
        beast::tcp_stream stream(executor);
        stream.expires_after(kConnectTimeout);
        if (config.socks_proxy) {
            auto proxy = parse_host_port(*config.socks_proxy).value();
            auto endpoints = co_await resolver.async_resolve(proxy.host, std::to_string(proxy.port), net::use_awaitable);
            co_await stream.async_connect(endpoints, net::use_awaitable);
            co_await socks5_connect(stream, address.host, address.port);
        } else {
            auto endpoints =
                co_await resolver.async_resolve(address.host, std::to_string(address.port), net::use_awaitable);
            co_await stream.async_connect(endpoints, net::use_awaitable);
        }
        if (!config.tls_outbound) co_return co_await finish_outbound(std::move(stream), std::move(address));

        ssl::stream<beast::tcp_stream> secure(std::move(stream), tls_client);
        if (!SSL_set_tlsext_host_name(secure.native_handle(), address.host.c_str())) co_return false;
        co_await secure.async_handshake(ssl::stream_base::client, net::use_awaitable);
        co_return co_await finish_outbound(std::move(secure), std::move(address));
    } catch (const std::exception&) {
        co_return false;
    }
}

template <class Next>
net::awaitable<bool> Node::Impl::finish_outbound(Next stream, PeerAddress address) {
    typename WsSession<Next>::Stream ws(std::move(stream));
    ws.set_option(websocket::stream_base::decorator(
        [](websocket::request_type& req) { req.set(http::field::sec_websocket_protocol, std::string(wire::kSubprotocol)); }));
    ws.read_message_max(wire::kMaxFrameBytes);
    websocket::response_type response;
    co_await ws.async_handshake(response, address.host + ":" + std::to_string(address.port), "/", net::use_awaitable);
    beast::get_lowest_layer(ws).expires_never();
    ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
    if (std::string(response[http::field::sec_websocket_protocol]) != wire::kSubprotocol) co_return false;
    std::make_shared<WsSession<Next>>(*this, std::move(ws), next_session++, true, std::move(address))->begin();
    co_return true;
}

bool Node::Impl::dial(const PeerAddress& address) {
    {
        std::lock_guard lock(stop_mutex);
        if (stopping) return false;
    }
    auto future = net::co_spawn(ioc, connect_out(address), net::use_future);
    if (future.wait_for(kDialWait) != std::future_status::ready) return false;
    try {
        return future.get();
    } catch (const std::exception&) {
        return false;
    }
}

net::awaitable<void> Node::Impl::produce_loop() {
    auto executor = co_await net::this_coro::executor;
    net::steady_timer timer(executor);
    const auto tick = std::min<std::chrono::milliseconds>(config.producer.block_interval / 4,
                                                          std::chrono::milliseconds(250));
    for (;;) {
        timer.expires_after(std::max(tick, std::chrono::milliseconds(10)));
        beast::error_code ec;
        co_await timer.async_wait(net::redirect_error(net::use_awaitable, ec));
        {
            std::lock_guard lock(stop_mutex);
            if (ec || stopping) co_return;
        }
        produce_tick();
    }
}

void Node::Impl::produce_tick() {
    std::lock_guard lock(node_mutex);
    const auto now = monotonic_ms();
    if (!producer->due(peer->pool(), now)) return;
    // Failures leave the records that were taken out of the pool behind; the
    // next tick works with whatever remains.
    producer->produce(*ledger, peer->pool(), unix_seconds(), now,
                      [this](const Block& b) { return peer->publish_block(b); });
}

void Node::Impl::bootstrap_loop() {
    peernet::Backoff backoff;
    peernet::BootstrapConfig bc;
    bc.manual = config.seeds;
    bc.dns_seeds = config.dns_seeds;
    bc.dns_port = config.dns_port;
    bc.min_peers = config.peer.min_peers;

    auto resolve = [](const std::string& host) {
        std::vector<std::string> out;
        net::io_context local;
        tcp::resolver resolver(local);
        beast::error_code ec;
        auto results = resolver.resolve(host, "", ec);
        if (ec) return out;
        for (const auto& r : results) {
            auto text = r.endpoint().address().to_string();
            if (std::find(out.begin(), out.end(), text) == out.end()) out.push_back(text);
        }
        return out;
    };

    for (;;) {
        std::chrono::seconds wait{5};
        if (open_sessions.load() < config.peer.min_peers) {
            peernet::AddressBook snapshot;
            {
                std::lock_guard lock(node_mutex);
                snapshot = book;
            }
            const bool have_sources = !bc.manual.empty() || !bc.dns_seeds.empty() || snapshot.size() > 0;
            if (have_sources) {
                peernet::BootstrapReport report;
                auto dial_fn = [this](const PeerAddress& a) {
                    if (a.port == p2p_port && (a.host == "127.0.0.1" || a.host == "localhost")) return false;
                    return dial(a);
                };
                auto result = peernet::bootstrap(bc, snapshot, resolve, dial_fn, unix_seconds(), &report);
                {
                    std::lock_guard lock(node_mutex);
                    for (const auto& attempt : report.attempts) {
                        book.add({attempt.address.host, attempt.address.port, 0, 0});
                        if (!attempt.connected) book.record_failure(attempt.address.host, attempt.address.port);
                    }
                }
                if (result)
                    backoff.reset();
                else
                    wait = backoff.next();
            }
        }
        std::unique_lock lock(stop_mutex);
        if (stop_cv.wait_for(lock, wait, [this] { return stopping; })) return;
    }
}

void Node::Impl::start_threads() {
    net::co_spawn(ioc, accept_loop(), net::detached);
    if (producer) net::co_spawn(ioc, produce_loop(), net::detached);
    io_thread = std::thread([this] { ioc.run(); });
    bootstrap_thread = std::thread([this] { bootstrap_loop(); });
}

NodeStatus Node::Impl::status() {
    NodeStatus s;
    s.kind = config.kind;
    s.p2p_port = p2p_port;
    if (api_server) s.api_port = api_server->port();
    std::lock_guard lock(node_mutex);
    s.peers = peer->established_count();
    for (const auto& id : ledger->followed()) {
        s.chains[id] = ledger->head_height(id);
        s.pooled_records += peer->pool().count(id);
    }
    if (producer) s.blocks_produced = producer->produced();
    return s;
}

void Node::Impl::shutdown() {
    {
        std::lock_guard lock(stop_mutex);
        if (stopped) return;
        stopping = true;
        stopped = true;
    }
    stop_cv.notify_all();
    if (bootstrap_thread.joinable()) bootstrap_thread.join();
    if (api_server) api_server->stop();
    net::post(ioc, [this] {
        draining = true;
        beast::error_code ec;
        acceptor.close(ec);
        for (auto& [id, s] : sessions) s->abort();
    });
    work.reset();
    // Handshakes still in flight would hold the loop for their full timeout.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (!ioc.stopped() && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    ioc.stop();
    if (io_thread.joinable()) io_thread.join();
    std::lock_guard lock(node_mutex);
    book.save(book_path);
}

nlohmann::json status_to_json(const NodeStatus& status) {
    nlohmann::json chains = nlohmann::json::object();
    for (const auto& [id, height] : status.chains) chains[id.hex()] = height ? nlohmann::json(*height) : nullptr;
    return {{"kind", std::string(wire::node_kind_name(status.kind))},
            {"peers", status.peers},
            {"chains", chains},
            {"p2p_port", status.p2p_port},
            {"api_port", status.api_port ? nlohmann::json(*status.api_port) : nullptr},
            {"pooled_records", status.pooled_records},
            {"blocks_produced", status.blocks_produced}};
}

Node::Node(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

Node::~Node() { stop(); }

Result<std::unique_ptr<Node>> Node::start(NodeConfig config) {
    auto impl = std::make_unique<Impl>(std::move(config));
    if (auto st = impl->open_storage(); !st) return st.error();
    if (auto st = impl->load_tls(); !st) return st.error();
    if (auto st = impl->bind(); !st) return st.error();
    Impl* raw = impl.get();
    if (raw->config.kind == NodeKind::full && raw->config.serve_api) {
        raw->api = std::make_unique<ApiService>(
            *raw->store,
            [raw](const ChainId& chain, const std::vector<nlohmann::json>& records) {
                std::lock_guard lock(raw->node_mutex);
                return raw->peer->submit_records(std::nullopt, chain, records);
            },
            [raw] { return status_to_json(raw->status()); }, &raw->signatures);
        raw->api_server = std::make_unique<ApiServer>(*raw->api);
        if (auto st = raw->api_server->start(raw->config.api_host, raw->config.api_port); !st) return st.error();
    }
    raw->start_threads();
    return std::unique_ptr<Node>(new Node(std::move(impl)));
}

void Node::stop() {
    if (impl_) impl_->shutdown();
}

Status Node::connect(const PeerAddress& address) {
    if (!impl_->dial(address))
        return make_error(Errc::bootstrap_failed, "cannot reach " + address.host + ":" + std::to_string(address.port));
    return {};
}

NodeStatus Node::status() const { return impl_->status(); }
const NodeConfig& Node::config() const { return impl_->config; }
std::uint16_t Node::p2p_port() const { return impl_->p2p_port; }

std::optional<std::uint16_t> Node::api_port() const {
    if (!impl_->api_server) return std::nullopt;
    return impl_->api_server->port();
}

chainstore::ChainStore* Node::store() { return impl_->store.get(); }
LightCache* Node::cache() { return impl_->cache.get(); }

peernet::SubmitOutcome Node::submit_records(const ChainId& chain_id, const std::vector<nlohmann::json>& records) {
    std::lock_guard lock(impl_->node_mutex);
    return impl_->peer->submit_records(std::nullopt, chain_id, records);
}

Result<std::optional<Block>> Node::produce_now() {
    if (!impl_->producer) return make_error(Errc::wrong_owner, "this node holds no owner key");
    std::lock_guard lock(impl_->node_mutex);
    return impl_->producer->produce(*impl_->ledger, impl_->peer->pool(), unix_seconds(), monotonic_ms(),
                                    [this](const Block& b) { return impl_->peer->publish_block(b); });
}

Result<chainstore::AppendOutcome> Node::publish(const Block& block) {
    std::lock_guard lock(impl_->node_mutex);
    return impl_->peer->publish_block(block);
}

peernet::PeerStats Node::peer_stats() const {
    std::lock_guard lock(impl_->node_mutex);
    return impl_->peer->stats();
}

Result<std::unique_ptr<Node>> run_node(const NodeConfig& config) { return Node::start(config); }

}  // namespace infnote::nodekit
