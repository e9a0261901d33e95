#pragma once

#include "infnote/chaincore/block.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace infnote::testing {

inline chaincore::KeyPair key_for(std::string_view label) {
    return chaincore::generate_keypair(chaincore::sha256(as_bytes(label))).value();
}

inline chaincore::ChainId chain_of(const chaincore::KeyPair& key) {
    return chaincore::derive_chain_id(key.public_key).value();
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

/// Genesis plus `count - 1` children with one-second spacing and short payloads.
inline std::vector<chaincore::Block> build_chain(const chaincore::KeyPair& owner, std::size_t count,
                                                 std::uint64_t start_time = 1'700'000'000) {
    std::vector<chaincore::Block> out;
    out.push_back(chaincore::make_genesis(owner, "test", start_time).value());
    for (std::size_t h = 1; h < count; ++h) {
        const auto& prev = out.back();
        std::string text = "block-" + std::to_string(h);
        chaincore::BlockDraft draft{prev.chain_id, h, prev.time + 1, prev.hash, Bytes(text.begin(), text.end())};
        out.push_back(chaincore::seal_block(std::move(draft), owner).value());
    }
    return out;
}

/// Removes itself on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("infnote-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace infnote::testing
