#pragma once

#include "infnote/nodekit/producer.hpp"
#include "infnote/peernet/peer_node.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace infnote::nodekit {

using wire::NodeKind;
using wire::PeerAddress;

inline constexpr std::uint16_t kDefaultP2pPort = 7420;
inline constexpr std::uint16_t kDefaultApiPort = 7421;

/// A chain to follow. Light nodes use the owner key to verify without genesis.
struct FollowSpec {
    ChainId chain_id;
    std::optional<chaincore::PublicKey> owner_pub;
};

struct NodeConfig {
    NodeKind kind = NodeKind::full;
    std::filesystem::path data_dir = "infnote-data";
    std::optional<std::filesystem::path> default_list;
    std::optional<KeyPair> owner_keys;
    std::vector<FollowSpec> follow;
    std::size_t cache_depth = 64;

    std::string listen_host = "0.0.0.0";
    /// 0 picks an ephemeral port.
    std::uint16_t listen_port = kDefaultP2pPort;
    /// Direct-connect HTTP API; full nodes only.
    bool serve_api = true;
    std::string api_host = "127.0.0.1";
    std::uint16_t api_port = kDefaultApiPort;

    peernet::PeerNodeConfig peer;
    std::vector<PeerAddress> seeds;
    std::vector<std::string> dns_seeds;
    std::uint16_t dns_port = kDefaultP2pPort;
    std::optional<std::filesystem::path> address_book_path;
    /// host:port of a SOCKS5 proxy used for every outbound dial.
    std::optional<std::string> socks_proxy;
    /// PEM certificate chain and key; with both set the listener also accepts wss.
    std::optional<std::filesystem::path> tls_cert;
    std::optional<std::filesystem::path> tls_key;
    /// Dial peers over wss. Certificates are not checked: peers are untrusted
    /// relays and blocks carry their own signatures.
    bool tls_outbound = false;

    ProducerConfig producer;

    /// Light nodes hold no owner keys and cache at least one block; TLS needs
    /// both files.
    Status validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Process environment.
std::optional<std::string> system_env(const std::string& name);

/// Reads `key = value` lines ('#' comments, optional quotes, lists either
/// comma separated or in [brackets]). Every key may be overridden by an
/// INFNOTE_<KEY> environment variable. Unknown keys are errors.
Result<NodeConfig> parse_config(std::string_view text, const EnvLookup& env = system_env,
                                NodeConfig base = {});
Result<NodeConfig> load_config(const std::filesystem::path& path, const EnvLookup& env = system_env,
                               NodeConfig base = {});

/// --config > INFNOTE_CONFIG > ./infnote.toml. Empty when none applies.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& flag,
                                                         const EnvLookup& env = system_env);

/// `host:port`, with [v6] brackets allowed around the host.
Result<PeerAddress> parse_host_port(std::string_view text);
/// `chain_hex` or `chain_hex:owner_pub_hex`.
Result<FollowSpec> parse_follow(std::string_view text);

/// Key files hold the private key as hex on the first line.
Result<KeyPair> read_key_file(const std::filesystem::path& path);
Status write_key_file(const std::filesystem::path& path, const KeyPair& key);

}  // namespace infnote::nodekit
