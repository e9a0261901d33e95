#include "infnote/nodekit/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace infnote::nodekit {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_list(std::string value) {
    value = trim(value);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    std::vector<std::string> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = unquote(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
Result<T> parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        return make_error(Errc::invalid_argument, key + ": not a number: " + value);
    return out;
}

Result<bool> parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    return make_error(Errc::invalid_argument, key + ": expected true or false");
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "kind",          "data_dir",       "default_list",   "owner_key",    "owner_key_file", "follow",
        "cache_depth",   "listen_host",    "listen_port",    "serve_api",    "api_host",       "api_port",
        "min_peers",     "seeds",          "dns_seeds",      "dns_port",     "address_book_path",
        "socks_proxy",   "tls_cert",       "tls_key",        "tls_outbound", "block_interval", "sync_window",  "seen_capacity",
    };
    return keys;
}

Status apply(NodeConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string value = unquote(trim(raw));
    auto port = [&](std::uint16_t& field) -> Status {
        auto n = parse_number<std::uint16_t>(key, value);
        if (!n) return n.error();
        field = *n;
        return {};
    };
    auto size = [&](std::size_t& field) -> Status {
        auto n = parse_number<std::size_t>(key, value);
        if (!n) return n.error();
        field = *n;
        return {};
    };
    if (key == "kind") {
        auto kind = wire::parse_node_kind(value);
        if (!kind) return make_error(Errc::invalid_argument, "kind: expected full or light");
        cfg.kind = *kind;
    } else if (key == "data_dir") {
        cfg.data_dir = value;
    } else if (key == "default_list") {
        cfg.default_list = value;
    } else if (key == "owner_key") {
        auto priv = array_from_hex<32>(value);
        if (!priv) return make_error(Errc::invalid_key, "owner_key: expected 64 hex digits");
        auto kp = chaincore::keypair_from_private(*priv);
        if (!kp) return kp.error();
        cfg.owner_keys = *kp;
    } else if (key == "owner_key_file") {
        auto kp = read_key_file(value);
        if (!kp) return kp.error();
        cfg.owner_keys = *kp;
    } else if (key == "follow") {
        cfg.follow.clear();
        for (const auto& item : split_list(raw)) {
            auto spec = parse_follow(item);
            if (!spec) return spec.error();
            cfg.follow.push_back(*spec);
        }
    } else if (key == "cache_depth") {
        return size(cfg.cache_depth);
    } else if (key == "listen_host") {
        cfg.listen_host = value;
    } else if (key == "listen_port") {
        return port(cfg.listen_port);
    } else if (key == "serve_api") {
        auto b = parse_bool(key, value);
        if (!b) return b.error();
        cfg.serve_api = *b;
    } else if (key == "api_host") {
        cfg.api_host = value;
    } else if (key == "api_port") {
        return port(cfg.api_port);
    } else if (key == "min_peers") {
        return size(cfg.peer.min_peers);
    } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& item : split_list(raw)) {
            auto a = parse_host_port(item);
            if (!a) return a.error();
            cfg.seeds.push_back(*a);
        }
    } else if (key == "dns_seeds") {
        cfg.dns_seeds = split_list(raw);
    } else if (key == "dns_port") {
        return port(cfg.dns_port);
    } else if (key == "address_book_path") {
        cfg.address_book_path = value;
    } else if (key == "socks_proxy") {
        if (value.empty()) {
            cfg.socks_proxy.reset();
        } else {
            if (auto a = parse_host_port(value); !a) return a.error();
            cfg.socks_proxy = value;
        }
    } else if (key == "tls_cert") {
        cfg.tls_cert = value;
    } else if (key == "tls_key") {
        cfg.tls_key = value;
    } else if (key == "tls_outbound") {
        auto b = parse_bool(key, value);
        if (!b) return b.error();
        cfg.tls_outbound = *b;
    } else if (key == "block_interval") {
        // Seconds, fractions allowed.
        char* end = nullptr;
        const double seconds = std::strtod(value.c_str(), &end);
        if (value.empty() || end != value.c_str() + value.size() || !(seconds > 0))
            return make_error(Errc::invalid_argument, "block_interval: expected positive seconds");
        cfg.producer.block_interval = std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000));
    } else if (key == "sync_window") {
        auto st = size(cfg.peer.sync_window);
        if (st && (cfg.peer.sync_window == 0 || cfg.peer.sync_window > wire::kMaxBlocksPerMessage))
            return make_error(Errc::invalid_argument, "sync_window: 1..64");
        return st;
    } else if (key == "seen_capacity") {
        return size(cfg.peer.seen_capacity);
    } else {
        return make_error(Errc::invalid_argument, "unknown config key: " + key);
    }
    return {};
}

std::string env_name(const std::string& key) {
    std::string out = "INFNOTE_";
    for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace

Status NodeConfig::validate() const {
    if (kind == NodeKind::light && owner_keys) return make_error(Errc::invalid_argument, "light nodes cannot own chains");
    if (cache_depth < 1) return make_error(Errc::invalid_argument, "cache_depth must be at least 1");
    if (tls_cert.has_value() != tls_key.has_value())
        return make_error(Errc::invalid_argument, "tls_cert and tls_key go together");
    return {};
}

std::optional<std::string> system_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

Result<NodeConfig> parse_config(std::string_view text, const EnvLookup& env, NodeConfig base) {
    NodeConfig cfg = std::move(base);
    std::map<std::string, std::string> values;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == '[') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            return make_error(Errc::invalid_argument, "line " + std::to_string(line_no) + ": expected key = value");
        values[trim(t.substr(0, eq))] = t.substr(eq + 1);
    }
    if (env) {
        for (const auto& key : known_keys())
            if (auto v = env(env_name(key))) values[key] = *v;
    }
    for (const auto& [key, value] : values)
        if (auto st = apply(cfg, key, value); !st) return st.error();
    return cfg;
}

Result<NodeConfig> load_config(const std::filesystem::path& path, const EnvLookup& env, NodeConfig base) {
    std::ifstream in(path);
    if (!in) return make_error(Errc::io_error, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), env, std::move(base));
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& flag,
                                                         const EnvLookup& env) {
    if (flag) return flag;
    if (env)
        if (auto v = env("INFNOTE_CONFIG"); v && !v->empty()) return std::filesystem::path(*v);
    std::error_code ec;
    if (std::filesystem::exists("infnote.toml", ec)) return std::filesystem::path("infnote.toml");
    return std::nullopt;
}

Result<PeerAddress> parse_host_port(std::string_view text) {
    std::string s = trim(text);
    std::string host;
    std::string port;
    if (!s.empty() && s.front() == '[') {
        auto close = s.find(']');
        if (close == std::string::npos || close + 1 >= s.size() || s[close + 1] != ':')
            return make_error(Errc::invalid_argument, "bad address: " + s);
        host = s.substr(1, close - 1);
        port = s.substr(close + 2);
    } else {
        auto colon = s.rfind(':');
        if (colon == std::string::npos || colon == 0) return make_error(Errc::invalid_argument, "bad address: " + s);
        host = s.substr(0, colon);
        port = s.substr(colon + 1);
    }
    auto p = parse_number<std::uint16_t>("port", port);
    if (!p || *p == 0) return make_error(Errc::invalid_argument, "bad port in " + s);
    return PeerAddress{host, *p, 0, 0};
}

Result<FollowSpec> parse_follow(std::string_view text) {
    const std::string s = trim(text);
    const auto colon = s.find(':');
    auto id = ChainId::from_hex(s.substr(0, colon));
    if (!id) return make_error(Errc::bad_chain_id, "not a chain id: " + s);
    FollowSpec spec{*id, std::nullopt};
    if (colon != std::string::npos) {
        auto pub = array_from_hex<33>(s.substr(colon + 1));
        if (!pub || !chaincore::is_valid_public_key(*pub)) return make_error(Errc::invalid_key, "bad owner key: " + s);
        auto derived = chaincore::derive_chain_id(*pub);
        if (!derived || *derived != *id) return make_error(Errc::bad_chain_id, "owner key does not match " + s);
        spec.owner_pub = *pub;
    }
    return spec;
}

Result<KeyPair> read_key_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return make_error(Errc::io_error, "cannot read key file " + path.string());
    std::string line;
    std::getline(in, line);
    auto priv = array_from_hex<32>(trim(line));
    if (!priv) return make_error(Errc::invalid_key, "key file must start with 64 hex digits");
    return chaincore::keypair_from_private(*priv);
}

Status write_key_file(const std::filesystem::path& path, const KeyPair& key) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::trunc);
    if (!out) return make_error(Errc::io_error, "cannot write " + path.string());
    out << to_hex(key.private_key) << '\n' << to_hex(key.public_key) << '\n';
    if (!out) return make_error(Errc::io_error, "cannot write " + path.string());
    std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                                 std::filesystem::perm_options::replace, ec);
    return {};
}

}  // namespace infnote::nodekit
