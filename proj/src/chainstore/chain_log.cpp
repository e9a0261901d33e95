#include "infnote/chainstore/chain_log.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

namespace infnote::chainstore {

namespace {

constexpr char kMagic[4] = {'I', 'N', 'F', 'N'};
constexpr std::uint64_t kHeaderBytes = 5;
constexpr std::size_t kIndexEntryBytes = 8 + 4 + 32;

Error io_error(const std::string& what) { return make_error(Errc::io_error, what + ": " + std::strerror(errno)); }

bool read_exact(int fd, void* buf, std::size_t len, std::uint64_t offset) {
    auto* p = static_cast<std::uint8_t*>(buf);
    while (len > 0) {
        ssize_t n = ::pread(fd, p, len, static_cast<off_t>(offset));
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            return false;
        }
        p += n;
        len -= static_cast<std::size_t>(n);
        offset += static_cast<std::uint64_t>(n);
    }
    return true;
}

bool write_exact(int fd, const void* buf, std::size_t len, std::uint64_t offset) {
    const auto* p = static_cast<const std::uint8_t*>(buf);
    while (len > 0) {
        ssize_t n = ::pwrite(fd, p, len, static_cast<off_t>(offset));
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += n;
        len -= static_cast<std::size_t>(n);
        offset += static_cast<std::uint64_t>(n);
    }
    return true;
}

}  // namespace

Result<std::unique_ptr<ChainLog>> ChainLog::open(const std::filesystem::path& path) {
    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) return io_error("open " + path.string());
    std::unique_ptr<ChainLog> log(new ChainLog(path, fd));

    struct stat st {};
    if (::fstat(fd, &st) != 0) return io_error("stat " + path.string());
    auto size = static_cast<std::uint64_t>(st.st_size);

    if (size < kHeaderBytes) {
        // Empty or a header torn mid-write: start the file over.
        std::uint8_t header[kHeaderBytes] = {'I', 'N', 'F', 'N', kFormatVersion};
        if (::ftruncate(fd, 0) != 0 || !write_exact(fd, header, sizeof header, 0))
            return io_error("write header " + path.string());
        log->truncated_ = size;
        size = kHeaderBytes;
    } else {
        std::uint8_t header[kHeaderBytes];
        if (!read_exact(fd, header, sizeof header, 0)) return io_error("read header " + path.string());
        if (std::memcmp(header, kMagic, 4) != 0) return make_error(Errc::io_error, path.string() + " is not a chain log");
        if (header[4] != kFormatVersion)
            return make_error(Errc::io_error, path.string() + " has unsupported format version");
    }

    if (auto scanned = log->scan(size); !scanned) return scanned.error();
    return log;
}

ChainLog::~ChainLog() {
    if (index_fd_ >= 0) ::close(index_fd_);
    if (fd_ >= 0) ::close(fd_);
}

std::filesystem::path ChainLog::index_path() const {
    auto p = path_;
    p += ".idx";
    return p;
}

Status ChainLog::scan(std::uint64_t file_size) {
    // Trust the side index for the prefix it covers, as long as every entry
    // lines up with a length prefix in the log.
    bool index_ok = true;
    {
        int ifd = ::open(index_path().c_str(), O_RDONLY | O_CLOEXEC);
        if (ifd >= 0) {
            struct stat st {};
            ::fstat(ifd, &st);
            const std::size_t count = static_cast<std::size_t>(st.st_size) / kIndexEntryBytes;
            std::vector<std::uint8_t> raw(count * kIndexEntryBytes);
            if (!raw.empty() && !read_exact(ifd, raw.data(), raw.size(), 0)) index_ok = false;
            ::close(ifd);
            if (static_cast<std::size_t>(st.st_size) % kIndexEntryBytes != 0) index_ok = false;
            std::uint64_t expect = kHeaderBytes;
            for (std::size_t i = 0; index_ok && i < count; ++i) {
                const std::uint8_t* p = raw.data() + i * kIndexEntryBytes;
                Entry e{read_u64_be(p), read_u32_be(p + 8), {}};
                std::copy(p + 12, p + 44, e.hash.begin());
                std::uint8_t len_be[4];
                if (e.offset != expect || e.offset + 4 + e.length > file_size ||
                    !read_exact(fd_, len_be, 4, e.offset) || read_u32_be(len_be) != e.length) {
                    index_ok = false;
                    break;
                }
                entries_.push_back(e);
                expect = e.offset + 4 + e.length;
            }
            if (!index_ok) entries_.clear();
        } else {
            index_ok = false;
        }
    }
    const std::size_t indexed = entries_.size();

    std::uint64_t pos = entries_.empty() ? kHeaderBytes : entries_.back().offset + 4 + entries_.back().length;
    std::optional<chaincore::Block> prev;
    if (!entries_.empty()) {
        auto last = read(entries_.size() - 1);
        if (!last) return last.error();
        prev = std::move(*last);
    }
    Bytes buf;
    while (pos < file_size) {
        std::uint8_t len_be[4];
        if (file_size - pos < 4 || !read_exact(fd_, len_be, 4, pos)) break;
        const std::uint32_t len = read_u32_be(len_be);
        if (file_size - pos - 4 < len) break;
        buf.resize(len);
        if (!read_exact(fd_, buf.data(), len, pos + 4)) break;
        auto block = chaincore::deserialize_block(buf);
        if (!block || block->height != entries_.size()) break;
        if (prev && block->prev_hash != prev->hash) break;
        entries_.push_back({pos, len, block->hash});
        prev = std::move(*block);
        pos += 4 + len;
    }
    if (pos < file_size) {
        if (::ftruncate(fd_, static_cast<off_t>(pos)) != 0) return io_error("truncate " + path_.string());
        truncated_ += file_size - pos;
    }
    end_ = pos;

    if (!index_ok || entries_.size() != indexed) {
        index_rebuilt_ = true;
        return rewrite_index();
    }
    index_fd_ = ::open(index_path().c_str(), O_WRONLY | O_CLOEXEC);
    if (index_fd_ < 0) return io_error("open index " + index_path().string());
    return {};
}

Status ChainLog::rewrite_index() {
    if (index_fd_ >= 0) ::close(index_fd_);
    index_fd_ = ::open(index_path().c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (index_fd_ < 0) return io_error("create index " + index_path().string());
    for (const auto& e : entries_)
        if (auto st = write_index_entry(e); !st) return st;
    return {};
}

Status ChainLog::write_index_entry(const Entry& entry) {
    Bytes raw;
    raw.reserve(kIndexEntryBytes);
    put_u64_be(raw, entry.offset);
    put_u32_be(raw, entry.length);
    raw.insert(raw.end(), entry.hash.begin(), entry.hash.end());
    // Entry i always lives at i * kIndexEntryBytes.
    const std::uint64_t at = static_cast<std::uint64_t>(&entry - entries_.data()) * kIndexEntryBytes;
    if (!write_exact(index_fd_, raw.data(), raw.size(), at)) return io_error("write index");
    return {};
}

Status ChainLog::append(const chaincore::Block& block) {
    Bytes framed;
    const Bytes body = chaincore::serialize_block(block);
    framed.reserve(4 + body.size());
    put_u32_be(framed, static_cast<std::uint32_t>(body.size()));
    framed.insert(framed.end(), body.begin(), body.end());
    if (!write_exact(fd_, framed.data(), framed.size(), end_)) {
        // Leave no partial frame behind for the next reader.
        if (::ftruncate(fd_, static_cast<off_t>(end_)) != 0) {
        }
        return io_error("append " + path_.string());
    }
    entries_.push_back({end_, static_cast<std::uint32_t>(body.size()), block.hash});
    end_ += framed.size();
    // A missed index write is repaired by the next open.
    (void)write_index_entry(entries_.back());
    return {};
}

Result<chaincore::Block> ChainLog::read(std::size_t height) const {
    if (height >= entries_.size()) return make_error(Errc::not_found, "height " + std::to_string(height));
    const auto& e = entries_[height];
    Bytes buf(e.length);
    if (!read_exact(fd_, buf.data(), buf.size(), e.offset + 4)) return io_error("read " + path_.string());
    return chaincore::deserialize_block(buf);
}

}  // namespace infnote::chainstore
