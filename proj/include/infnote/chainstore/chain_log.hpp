#pragma once

#include "infnote/chaincore/block.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace infnote::chainstore {

/// Append-only block file for one chain:
///   "INFN" || version (1 byte) || repeated (u32 BE length || serialized block)
/// A side file `<log>.idx` caches (offset, hash) per height and is rebuilt from
/// the log whenever it disagrees. On open, a torn or unparsable tail is cut off
/// so the log always holds a valid prefix.
class ChainLog {
public:
    static constexpr std::uint8_t kFormatVersion = 1;

    static Result<std::unique_ptr<ChainLog>> open(const std::filesystem::path& path);
    ~ChainLog();

    ChainLog(const ChainLog&) = delete;
    ChainLog& operator=(const ChainLog&) = delete;

    Status append(const chaincore::Block& block);
    Result<chaincore::Block> read(std::size_t height) const;

    std::size_t size() const { return entries_.size(); }
    const Hash256& hash_at(std::size_t height) const { return entries_[height].hash; }
    /// Bytes cut from the tail during open (0 for a clean file).
    std::uint64_t truncated_bytes() const { return truncated_; }
    bool index_was_rebuilt() const { return index_rebuilt_; }

private:
    struct Entry {
        std::uint64_t offset;
        std::uint32_t length;
        Hash256 hash;
    };

    ChainLog(std::filesystem::path path, int fd) : path_(std::move(path)), fd_(fd) {}

    Status scan(std::uint64_t file_size);
    Status write_index_entry(const Entry& entry);
    Status rewrite_index();
    std::filesystem::path index_path() const;

    std::filesystem::path path_;
    int fd_ = -1;
    int index_fd_ = -1;
    std::vector<Entry> entries_;
    std::uint64_t end_ = 0;
    std::uint64_t truncated_ = 0;
    bool index_rebuilt_ = false;
};

}  // namespace infnote::chainstore
