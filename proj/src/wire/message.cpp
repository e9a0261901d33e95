#include "infnote/wire/message.hpp"

namespace infnote::wire {

using nlohmann::json;

std::string_view node_kind_name(NodeKind kind) { return kind == NodeKind::full ? "full" : "light"; }

std::optional<NodeKind> parse_node_kind(std::string_view name) {
    if (name == "full") return NodeKind::full;
    if (name == "light") return NodeKind::light;
    return std::nullopt;
}

namespace {

template <class T>
constexpr std::string_view type_of = "";
template <> constexpr std::string_view type_of<Hello> = "hello";
template <> constexpr std::string_view type_of<HelloAck> = "hello_ack";
template <> constexpr std::string_view type_of<GetPeers> = "get_peers";
template <> constexpr std::string_view type_of<Peers> = "peers";
template <> constexpr std::string_view type_of<GetBlocks> = "get_blocks";
template <> constexpr std::string_view type_of<Blocks> = "blocks";
template <> constexpr std::string_view type_of<NewBlock> = "new_block";
template <> constexpr std::string_view type_of<SubmitRecords> = "submit_records";
template <> constexpr std::string_view type_of<ErrorMessage> = "error";

json hello_body(const Hello& h) {
    json heads = json::array();
    for (const auto& head : h.chain_heads) heads.push_back({{"chain_id", head.chain_id.hex()}, {"height", head.height}});
    json body = {{"protocol_version", h.protocol_version},
                 {"node_kind", node_kind_name(h.node_kind)},
                 {"chain_heads", std::move(heads)}};
    if (h.listen_port) body["listen_port"] = *h.listen_port;
    return body;
}

json body_of(const Message& message) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Hello> || std::is_same_v<T, HelloAck>) {
                return hello_body(m);
            } else if constexpr (std::is_same_v<T, GetPeers>) {
                return json::object();
            } else if constexpr (std::is_same_v<T, Peers>) {
                json list = json::array();
                for (const auto& a : m.addresses)
                    list.push_back({{"host", a.host}, {"port", a.port}, {"last_seen", a.last_seen}});
                return {{"addresses", std::move(list)}};
            } else if constexpr (std::is_same_v<T, GetBlocks>) {
                return {{"chain_id", m.chain_id.hex()}, {"from", m.from}, {"to", m.to}};
            } else if constexpr (std::is_same_v<T, SubmitRecords>) {
                return {{"chain_id", m.chain_id.hex()}, {"records", m.records}};
            } else if constexpr (std::is_same_v<T, ErrorMessage>) {
                return {{"code", m.code}, {"detail", m.detail}};
            } else {
                return json::object();  // block-carrying types are written by hand
            }
        },
        message);
}

// Block hex needs no escaping, so large block messages skip the JSON DOM.
std::string encode_blocks(const Blocks& m) {
    std::size_t size = 96;
    for (const auto& b : m.blocks) size += encoded_block_bytes(b);
    std::string out;
    out.reserve(size);
    out += R"({"v":1,"type":"blocks","body":{"chain_id":")";
    out += m.chain_id.hex();
    out += R"(","blocks":[)";
    for (std::size_t i = 0; i < m.blocks.size(); ++i) {
        if (i) out.push_back(',');
        out.push_back('"');
        out += chaincore::block_to_hex(m.blocks[i]);
        out.push_back('"');
    }
    out += "]}}";
    return out;
}

std::string encode_new_block(const NewBlock& m) {
    std::string out;
    out.reserve(encoded_block_bytes(m.block) + 128);
    out += R"({"v":1,"type":"new_block","body":{"chain_id":")";
    out += m.block.chain_id.hex();
    out += R"(","block":")";
    out += chaincore::block_to_hex(m.block);
    out += "\"}}";
    return out;
}

Error bad_json(std::string detail) { return make_error(Errc::bad_json, std::move(detail)); }

// Field accessors that turn shape problems into bad-json.
Result<const json*> field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) return bad_json(std::string("missing field ") + key);
    return &*it;
}

Result<std::uint64_t> u64_field(const json& obj, const char* key) {
    auto f = field(obj, key);
    if (!f) return f.error();
    if (!(*f)->is_number_unsigned() && !((*f)->is_number_integer() && (*f)->get<std::int64_t>() >= 0))
        return bad_json(std::string(key) + " must be a non-negative integer");
    return (*f)->get<std::uint64_t>();
}

Result<std::string> string_field(const json& obj, const char* key) {
    auto f = field(obj, key);
    if (!f) return f.error();
    if (!(*f)->is_string()) return bad_json(std::string(key) + " must be a string");
    return (*f)->get<std::string>();
}

Result<ChainId> chain_id_field(const json& obj, const char* key = "chain_id") {
    auto s = string_field(obj, key);
    if (!s) return s.error();
    auto id = ChainId::from_hex(*s);
    if (!id) return bad_json(std::string(key) + " must be 64 hex chars");
    return *id;
}

Result<std::uint16_t> port_of(const json& value) {
    if (!value.is_number_integer()) return bad_json("port must be an integer");
    const auto p = value.get<std::int64_t>();
    if (p < 1 || p > 65535) return bad_json("port out of range");
    return static_cast<std::uint16_t>(p);
}

Result<Hello> decode_hello(const json& body) {
    Hello h;
    auto version = field(body, "protocol_version");
    if (!version) return version.error();
    if (!(*version)->is_number_integer()) return bad_json("protocol_version must be an integer");
    h.protocol_version = static_cast<int>((*version)->get<std::int64_t>());
    auto kind = string_field(body, "node_kind");
    if (!kind) return kind.error();
    auto parsed = parse_node_kind(*kind);
    if (!parsed) return bad_json("node_kind must be full or light");
    h.node_kind = *parsed;
    auto heads = field(body, "chain_heads");
    if (!heads) return heads.error();
    if (!(*heads)->is_array()) return bad_json("chain_heads must be an array");
    for (const auto& item : **heads) {
        if (!item.is_object()) return bad_json("chain head must be an object");
        auto id = chain_id_field(item);
        if (!id) return id.error();
        auto height = u64_field(item, "height");
        if (!height) return height.error();
        h.chain_heads.push_back({*id, *height});
    }
    if (auto port = body.find("listen_port"); port != body.end() && !port->is_null()) {
        auto p = port_of(*port);
        if (!p) return p.error();
        h.listen_port = *p;
    }
    return h;
}

Result<Block> block_of(const json& value) {
    if (!value.is_string()) return bad_json("block must be a hex string");
    auto block = chaincore::block_from_hex(value.get_ref<const std::string&>());
    if (!block) return make_error(Errc::malformed_block, block.error().message());
    return block;
}

Result<Message> decode_body(std::string_view type, const json& body) {
    if (type == "hello" || type == "hello_ack") {
        auto h = decode_hello(body);
        if (!h) return h.error();
        if (type == "hello") return Message(std::move(*h));
        HelloAck ack;
        static_cast<Hello&>(ack) = std::move(*h);
        return Message(std::move(ack));
    }
    if (type == "get_peers") return Message(GetPeers{});
    if (type == "peers") {
        auto list = field(body, "addresses");
        if (!list) return list.error();
        if (!(*list)->is_array()) return bad_json("addresses must be an array");
        Peers peers;
        for (const auto& item : **list) {
            if (!item.is_object()) return bad_json("address must be an object");
            PeerAddress a;
            auto host = string_field(item, "host");
            if (!host) return host.error();
            if (host->empty()) return bad_json("empty host");
            a.host = std::move(*host);
            auto port = field(item, "port");
            if (!port) return port.error();
            auto p = port_of(**port);
            if (!p) return p.error();
            a.port = *p;
            if (item.contains("last_seen")) {
                auto seen = u64_field(item, "last_seen");
                if (!seen) return seen.error();
                a.last_seen = *seen;
            }
            peers.addresses.push_back(std::move(a));
        }
        return Message(std::move(peers));
    }
    if (type == "get_blocks") {
        auto id = chain_id_field(body);
        auto from = u64_field(body, "from");
        auto to = u64_field(body, "to");
        if (!id) return id.error();
        if (!from) return from.error();
        if (!to) return to.error();
        return Message(GetBlocks{*id, *from, *to});
    }
    if (type == "blocks") {
        auto id = chain_id_field(body);
        if (!id) return id.error();
        auto list = field(body, "blocks");
        if (!list) return list.error();
        if (!(*list)->is_array()) return bad_json("blocks must be an array");
        if ((*list)->size() > kMaxBlocksPerMessage) return bad_json("more than 64 blocks in one message");
        Blocks blocks{*id, {}};
        for (const auto& item : **list) {
            auto b = block_of(item);
            if (!b) return b.error();
            if (b->chain_id != *id) return make_error(Errc::malformed_block, "block from another chain");
            if (!blocks.blocks.empty() && b->height != blocks.blocks.back().height + 1)
                return make_error(Errc::malformed_block, "blocks must be consecutive heights");
            blocks.blocks.push_back(std::move(*b));
        }
        return Message(std::move(blocks));
    }
    if (type == "new_block") {
        auto id = chain_id_field(body);
        if (!id) return id.error();
        auto raw = field(body, "block");
        if (!raw) return raw.error();
        auto b = block_of(**raw);
        if (!b) return b.error();
        if (b->chain_id != *id) return make_error(Errc::malformed_block, "chain_id does not match block");
        return Message(NewBlock{std::move(*b)});
    }
    if (type == "submit_records") {
        auto id = chain_id_field(body);
        if (!id) return id.error();
        auto list = field(body, "records");
        if (!list) return list.error();
        if (!(*list)->is_array()) return bad_json("records must be an array");
        SubmitRecords s{*id, {}};
        for (const auto& item : **list) s.records.push_back(item);
        return Message(std::move(s));
    }
    if (type == "error") {
        auto code = string_field(body, "code");
        if (!code) return code.error();
        ErrorMessage e{std::move(*code), {}};
        if (auto d = body.find("detail"); d != body.end() && d->is_string()) e.detail = d->get<std::string>();
        return Message(std::move(e));
    }
    return make_error(Errc::unknown_type, std::string(type));
}

}  // namespace

std::string_view message_type(const Message& message) {
    return std::visit([](const auto& m) { return type_of<std::decay_t<decltype(m)>>; }, message);
}

std::size_t encoded_block_bytes(const Block& block) {
    return 2 * (chaincore::kCanonicalHeaderBytes + block.payload.size() + chaincore::kSignatureBytes) + 3;
}

std::string encode_message(const Message& message) {
    if (const auto* b = std::get_if<Blocks>(&message)) return encode_blocks(*b);
    if (const auto* n = std::get_if<NewBlock>(&message)) return encode_new_block(*n);
    std::string out = R"({"v":1,"type":")";
    out += message_type(message);
    out += R"(","body":)";
    out += body_of(message).dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('}');
    return out;
}

Result<Message> decode_message(std::string_view text) {
    json envelope = json::parse(text.begin(), text.end(), nullptr, false);
    if (envelope.is_discarded()) return bad_json("frame is not valid JSON");
    if (!envelope.is_object()) return bad_json("envelope must be an object");
    auto v = envelope.find("v");
    if (v == envelope.end()) return bad_json("missing field v");
    if (!v->is_number_integer() || v->get<std::int64_t>() != kEnvelopeVersion)
        return make_error(Errc::bad_version, "envelope version " + v->dump());
    auto type = envelope.find("type");
    if (type == envelope.end() || !type->is_string()) return bad_json("type must be a string");
    auto body = envelope.find("body");
    if (body == envelope.end() || !body->is_object()) return bad_json("body must be an object");
    return decode_body(type->get_ref<const std::string&>(), *body);
}

ErrorMessage error_message(const Error& error) { return {std::string(errc_name(error.code)), error.detail}; }

std::vector<Blocks> chunk_blocks(const ChainId& chain_id, std::vector<Block> blocks, std::size_t frame_budget) {
    std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.height < b.height; });
    constexpr std::size_t kEnvelopeOverhead = 160;
    std::vector<Blocks> out;
    std::size_t used = 0;
    for (auto& block : blocks) {
        const std::size_t cost = encoded_block_bytes(block);
        if (out.empty() || out.back().blocks.size() >= kMaxBlocksPerMessage ||
            (!out.back().blocks.empty() && used + cost > frame_budget)) {
            out.push_back(Blocks{chain_id, {}});
            used = kEnvelopeOverhead;
        }
        used += cost;
        out.back().blocks.push_back(std::move(block));
    }
    return out;
}

Result<HandshakeOutcome> evaluate_hello(const HandshakeState& local, const Hello& remote) {
    if (remote.protocol_version != local.hello.protocol_version)
        return make_error(Errc::version_mismatch, "peer speaks protocol " + std::to_string(remote.protocol_version) +
                                                      ", we speak " + std::to_string(local.hello.protocol_version));
    HandshakeOutcome out;
    out.peer_kind = remote.node_kind;
    out.peer_heads = remote.chain_heads;
    out.peer_listen_port = remote.listen_port;
    for (const auto& head : remote.chain_heads) {
        if (!local.followed.count(head.chain_id)) continue;
        std::optional<std::uint64_t> mine;
        for (const auto& own : local.hello.chain_heads)
            if (own.chain_id == head.chain_id) mine = own.height;
        if (!mine || head.height > *mine) out.candidates.push_back({head.chain_id, mine ? *mine + 1 : 0, head.height});
    }
    return out;
}

Result<std::pair<HandshakeOutcome, HandshakeOutcome>> handshake(const HandshakeState& initiator,
                                                                const HandshakeState& responder) {
    auto hello = decode_message(encode_message(initiator.hello));
    if (!hello) return hello.error();
    auto responder_view = evaluate_hello(responder, std::get<Hello>(*hello));
    if (!responder_view) return responder_view.error();

    HelloAck ack;
    static_cast<Hello&>(ack) = responder.hello;
    auto reply = decode_message(encode_message(ack));
    if (!reply) return reply.error();
    auto initiator_view = evaluate_hello(initiator, std::get<HelloAck>(*reply));
    if (!initiator_view) return initiator_view.error();
    return std::pair{std::move(*initiator_view), std::move(*responder_view)};
}

}  // namespace infnote::wire
