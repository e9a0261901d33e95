#include "infnote/chainstore/store.hpp"

#include "infnote/chaincore/golden.hpp"

#include <fstream>
#include <sstream>

namespace infnote::chainstore {

namespace fs = std::filesystem;

std::string_view status_name(ChainStatus status) {
    switch (status) {
        case ChainStatus::followed: return "followed";
        case ChainStatus::dropped: return "dropped";
        case ChainStatus::banned: return "banned";
    }
    return "unknown";
}

std::string_view source_name(ChainSource source) {
    return source == ChainSource::default_list ? "default-list" : "user-added";
}

namespace {

std::string registry_line(const ChainRegistryEntry& e) {
    std::string line = e.chain_id.hex() + ' ' + to_hex(e.owner_pub);
    if (!e.label.empty()) line += ' ' + e.label;
    return line;
}

Result<ChainRegistryEntry> parse_registry_line(const std::string& line) {
    std::istringstream in(line);
    std::string id_hex, owner_hex;
    in >> id_hex >> owner_hex;
    auto id = ChainId::from_hex(id_hex);
    auto owner = array_from_hex<33>(owner_hex);
    if (!id || !owner) return make_error(Errc::invalid_entry, "bad registry line: " + line);
    ChainRegistryEntry e;
    e.chain_id = *id;
    e.owner_pub = *owner;
    std::getline(in >> std::ws, e.label);
    return e;
}

Status check_entry(const ChainRegistryEntry& e) {
    auto derived = chaincore::derive_chain_id(e.owner_pub);
    if (!derived || *derived != e.chain_id)
        return make_error(Errc::invalid_entry, "owner key does not hash to chain id " + e.chain_id.hex());
    if (e.label.find_first_of("\r\n") != std::string::npos)
        return make_error(Errc::invalid_entry, "label must be a single line");
    return {};
}

// Write to a sibling temp file and rename over the target.
Status write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) return make_error(Errc::io_error, "write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) return make_error(Errc::io_error, "rename " + tmp.string() + ": " + ec.message());
    return {};
}

}  // namespace

Result<std::vector<ChainRegistryEntry>> read_registry_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return make_error(Errc::io_error, "cannot read " + path.string());
    std::vector<ChainRegistryEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto e = parse_registry_line(line);
        if (!e) return e.error();
        if (auto st = check_entry(*e); !st) return st.error();
        out.push_back(std::move(*e));
    }
    return out;
}

Status write_registry_file(const fs::path& path, const std::vector<ChainRegistryEntry>& entries) {
    std::string content;
    for (const auto& e : entries) content += registry_line(e) + '\n';
    return write_file_atomic(path, content);
}

Result<std::unique_ptr<ChainStore>> ChainStore::open(const fs::path& data_dir, std::optional<fs::path> default_list) {
    std::unique_ptr<ChainStore> store(new ChainStore(data_dir));
    if (auto st = store->load(std::move(default_list)); !st) return st.error();
    return store;
}

fs::path ChainStore::log_path(const ChainId& chain_id) const { return dir_ / "chains" / (chain_id.hex() + ".log"); }

Status ChainStore::load(std::optional<fs::path> default_list) {
    std::error_code ec;
    fs::create_directories(dir_ / "chains", ec);
    fs::create_directories(dir_ / "bans", ec);
    if (ec) return make_error(Errc::io_error, "create " + dir_.string() + ": " + ec.message());

    if (!default_list && fs::exists(dir_ / "defaults.list")) default_list = dir_ / "defaults.list";
    if (default_list) {
        auto entries = read_registry_file(*default_list);
        if (!entries) return entries.error();
        for (auto& e : *entries) {
            e.source = ChainSource::default_list;
            defaults_[e.chain_id] = std::move(e);
        }
    }
    for (auto [file, status] : {std::pair{"followed.list", ChainStatus::followed},
                                std::pair{"dropped.list", ChainStatus::dropped}}) {
        if (!fs::exists(dir_ / file)) continue;
        auto entries = read_registry_file(dir_ / file);
        if (!entries) return entries.error();
        for (auto& e : *entries) {
            e.source = ChainSource::user_added;
            e.status = status;
            overrides_[e.chain_id] = std::move(e);
        }
    }
    for (const auto& f : fs::directory_iterator(dir_ / "bans")) {
        if (f.path().extension() != ".evidence") continue;
        std::ifstream in(f.path());
        std::string line, a_hex, b_hex;
        std::getline(in, line);
        std::getline(in, a_hex);
        std::getline(in, b_hex);
        auto e = parse_registry_line(line);
        auto a = chaincore::block_from_hex(a_hex);
        auto b = chaincore::block_from_hex(b_hex);
        if (!e || !a || !b) continue;
        EquivocationEvidence evidence{std::move(*a), std::move(*b)};
        if (!check_entry(*e) || !chaincore::check_evidence(evidence, e->owner_pub)) continue;
        e->status = ChainStatus::banned;
        e->ban_evidence = std::move(evidence);
        bans_[e->chain_id] = std::move(*e);
    }

    std::vector<ChainId> known;
    for (const auto* m : {&defaults_, &overrides_, &bans_})
        for (const auto& [id, e] : *m) known.push_back(id);
    for (const auto& id : known)
        if (auto c = open_chain(id); !c) return c.error();
    return {};
}

Result<ChainStore::Chain*> ChainStore::open_chain(const ChainId& chain_id) {
    if (auto it = chains_.find(chain_id); it != chains_.end()) return it->second.get();
    auto log = ChainLog::open(log_path(chain_id));
    if (!log) return log.error();
    auto chain = std::make_unique<Chain>();
    chain->log = std::move(*log);
    for (std::size_t h = 0; h < chain->log->size(); ++h) by_hash_[chain->log->hash_at(h)] = {chain_id, h};
    return chains_.emplace(chain_id, std::move(chain)).first->second.get();
}

Result<ChainStore::Chain*> ChainStore::chain_for(const ChainId& chain_id) const {
    std::lock_guard lock(registry_mutex_);
    auto it = chains_.find(chain_id);
    if (it == chains_.end()) return make_error(Errc::unknown_chain, chain_id.hex());
    return it->second.get();
}

ChainRegistryEntry ChainStore::resolve(const ChainId& chain_id) const {
    ChainRegistryEntry e;
    bool listed = true;
    if (auto o = overrides_.find(chain_id); o != overrides_.end()) {
        e = o->second;
    } else if (auto d = defaults_.find(chain_id); d != defaults_.end()) {
        e = d->second;
        e.status = ChainStatus::followed;
    } else {
        listed = false;
    }
    if (auto b = bans_.find(chain_id); b != bans_.end()) {
        if (!listed) {
            e = b->second;
            e.source = ChainSource::user_added;
        }
        e.status = ChainStatus::banned;
        e.ban_evidence = b->second.ban_evidence;
    }
    return e;
}

Status ChainStore::save_overrides() const {
    std::vector<ChainRegistryEntry> followed, dropped;
    for (const auto& [id, e] : overrides_) (e.status == ChainStatus::dropped ? dropped : followed).push_back(e);
    if (auto st = write_registry_file(dir_ / "followed.list", followed); !st) return st;
    return write_registry_file(dir_ / "dropped.list", dropped);
}

Status ChainStore::follow_chain(ChainRegistryEntry entry) {
    if (auto st = check_entry(entry); !st) return st;
    std::lock_guard lock(registry_mutex_);
    entry.source = ChainSource::user_added;
    entry.status = ChainStatus::followed;
    entry.ban_evidence.reset();
    overrides_[entry.chain_id] = entry;
    if (auto c = open_chain(entry.chain_id); !c) return c.error();
    return save_overrides();
}

Status ChainStore::drop_chain(const ChainId& chain_id) {
    std::lock_guard lock(registry_mutex_);
    if (!chains_.count(chain_id)) return make_error(Errc::unknown_chain, chain_id.hex());
    ChainRegistryEntry e = resolve(chain_id);
    e.source = ChainSource::user_added;
    e.status = ChainStatus::dropped;
    e.ban_evidence.reset();
    overrides_[chain_id] = std::move(e);
    return save_overrides();
}

std::vector<ChainRegistryEntry> ChainStore::list_chains(std::optional<ChainStatus> filter) const {
    std::lock_guard lock(registry_mutex_);
    std::vector<ChainRegistryEntry> out;
    for (const auto& [id, chain] : chains_) {
        auto e = resolve(id);
        if (!filter || e.status == *filter) out.push_back(std::move(e));
    }
    return out;
}

std::optional<ChainRegistryEntry> ChainStore::entry(const ChainId& chain_id) const {
    std::lock_guard lock(registry_mutex_);
    if (!chains_.count(chain_id)) return std::nullopt;
    return resolve(chain_id);
}

bool ChainStore::is_followed(const ChainId& chain_id) const {
    auto e = entry(chain_id);
    return e && e->status == ChainStatus::followed;
}

Result<AppendOutcome> ChainStore::append_block(const Block& block) {
    auto e = entry(block.chain_id);
    if (!e) return make_error(Errc::unknown_chain, block.chain_id.hex());
    if (e->status == ChainStatus::banned) return make_error(Errc::chain_banned, block.chain_id.hex());
    if (e->status == ChainStatus::dropped) return make_error(Errc::chain_dropped, block.chain_id.hex());

    Status verified = block.height == 0 ? chaincore::verify_genesis(block, e->owner_pub)
                                        : chaincore::verify_block(block, e->owner_pub);
    if (!verified) return verified.error();

    auto chain = chain_for(block.chain_id);
    if (!chain) return chain.error();
    std::unique_lock lock((*chain)->mutex);
    ChainLog& log = *(*chain)->log;
    {
        std::lock_guard reg(registry_mutex_);
        if (bans_.count(block.chain_id)) return make_error(Errc::chain_banned, block.chain_id.hex());
    }

    const std::uint64_t size = log.size();
    if (block.height < size) {
        if (log.hash_at(block.height) == block.hash) return AppendOutcome::duplicate;
        auto stored = log.read(block.height);
        if (!stored) return stored.error();
        if (auto st = ban_locked(*e, EquivocationEvidence{std::move(*stored), block}); !st) return st.error();
        return AppendOutcome::equivocation;
    }
    if (block.height > size)
        return make_error(Errc::bad_height,
                          "height " + std::to_string(block.height) + " beyond head " + std::to_string(size));
    if (size > 0) {
        auto head = log.read(size - 1);
        if (!head) return head.error();
        if (auto st = chaincore::validate_successor(*head, block); !st) return st.error();
    }
    if (auto st = log.append(block); !st) return st.error();
    {
        std::lock_guard reg(registry_mutex_);
        by_hash_[block.hash] = {block.chain_id, block.height};
    }

    std::vector<AppendHook> hooks;
    {
        std::lock_guard h(hooks_mutex_);
        hooks = append_hooks_;
    }
    for (const auto& hook : hooks) hook(block);
    return AppendOutcome::appended;
}

Status ChainStore::persist_ban(const ChainRegistryEntry& entry) const {
    const auto& ev = *entry.ban_evidence;
    std::string content = registry_line(entry) + '\n' + chaincore::block_to_hex(ev.block_a) + '\n' +
                          chaincore::block_to_hex(ev.block_b) + '\n';
    return write_file_atomic(dir_ / "bans" / (entry.chain_id.hex() + ".evidence"), content);
}

Status ChainStore::ban_locked(const ChainRegistryEntry& entry, const EquivocationEvidence& evidence) {
    if (auto st = chaincore::check_evidence(evidence, entry.owner_pub); !st)
        return make_error(Errc::invalid_evidence, st.error().message());
    ChainRegistryEntry banned = entry;
    banned.status = ChainStatus::banned;
    banned.ban_evidence = evidence;
    {
        std::lock_guard reg(registry_mutex_);
        if (bans_.count(entry.chain_id)) return {};
        if (auto st = persist_ban(banned); !st) return st;
        bans_[entry.chain_id] = banned;
    }
    std::vector<BanHook> hooks;
    {
        std::lock_guard h(hooks_mutex_);
        hooks = ban_hooks_;
    }
    for (const auto& hook : hooks) hook(entry.chain_id, evidence);
    return {};
}

Status ChainStore::record_equivocation(const EquivocationEvidence& evidence) {
    auto e = entry(evidence.block_a.chain_id);
    if (!e) return make_error(Errc::unknown_chain, evidence.block_a.chain_id.hex());
    return ban_locked(*e, evidence);
}

Result<std::optional<Block>> ChainStore::get_block(const ChainId& chain_id, std::uint64_t height) const {
    auto chain = chain_for(chain_id);
    if (!chain) return chain.error();
    std::shared_lock lock((*chain)->mutex);
    if (height >= (*chain)->log->size()) return std::optional<Block>{};
    auto block = (*chain)->log->read(height);
    if (!block) return block.error();
    return std::optional<Block>(std::move(*block));
}

Result<std::optional<Block>> ChainStore::get_head(const ChainId& chain_id) const {
    auto chain = chain_for(chain_id);
    if (!chain) return chain.error();
    std::shared_lock lock((*chain)->mutex);
    const auto size = (*chain)->log->size();
    if (size == 0) return std::optional<Block>{};
    auto block = (*chain)->log->read(size - 1);
    if (!block) return block.error();
    return std::optional<Block>(std::move(*block));
}

Result<std::vector<Block>> ChainStore::get_range(const ChainId& chain_id, std::uint64_t from,
                                                 std::uint64_t to) const {
    if (to < from) return make_error(Errc::invalid_argument, "range end before start");
    auto chain = chain_for(chain_id);
    if (!chain) return chain.error();
    std::shared_lock lock((*chain)->mutex);
    std::vector<Block> out;
    const std::uint64_t size = (*chain)->log->size();
    for (std::uint64_t h = from; h <= to && h < size; ++h) {
        auto block = (*chain)->log->read(h);
        if (!block) return block.error();
        out.push_back(std::move(*block));
    }
    return out;
}

Result<std::uint64_t> ChainStore::chain_size(const ChainId& chain_id) const {
    auto chain = chain_for(chain_id);
    if (!chain) return chain.error();
    std::shared_lock lock((*chain)->mutex);
    return static_cast<std::uint64_t>((*chain)->log->size());
}

std::optional<BlockLocation> ChainStore::find_by_hash(const Hash256& hash) const {
    std::lock_guard lock(registry_mutex_);
    auto it = by_hash_.find(hash);
    if (it == by_hash_.end()) return std::nullopt;
    return it->second;
}

Result<std::size_t> ChainStore::verify_chain(const ChainId& chain_id) const {
    auto e = entry(chain_id);
    if (!e) return make_error(Errc::unknown_chain, chain_id.hex());
    auto size = chain_size(chain_id);
    if (!size) return size.error();
    std::size_t violations = 0;
    std::optional<Block> prev;
    for (std::uint64_t h = 0; h < *size; ++h) {
        auto block = get_block(chain_id, h);
        if (!block || !*block) {
            ++violations;
            prev.reset();
            continue;
        }
        const Block& b = **block;
        bool ok = h == 0 ? static_cast<bool>(chaincore::verify_genesis(b, e->owner_pub))
                         : static_cast<bool>(chaincore::verify_block(b, e->owner_pub));
        if (ok && h > 0) ok = prev && chaincore::validate_successor(*prev, b);
        if (!ok || b.height != h) ++violations;
        prev = b;
    }
    return violations;
}

Status ChainStore::export_chain(const ChainId& chain_id, const fs::path& file) const {
    auto size = chain_size(chain_id);
    if (!size) return size.error();
    if (*size == 0) return make_error(Errc::not_found, "chain " + chain_id.hex() + " has no blocks");
    auto blocks = get_range(chain_id, 0, *size - 1);
    if (!blocks) return blocks.error();
    return chaincore::write_golden_blocks(file, *blocks);
}

Result<std::size_t> ChainStore::import_chain(const fs::path& file) {
    auto blocks = chaincore::read_golden_blocks(file);
    if (!blocks) return blocks.error();
    if (blocks->empty() || (*blocks)[0].height != 0)
        return make_error(Errc::bad_genesis, file.string() + " does not start with a genesis block");
    const Block& genesis = (*blocks)[0];
    auto info = chaincore::parse_genesis_payload(genesis.payload);
    if (!info) return make_error(Errc::bad_genesis, "genesis payload does not name an owner");
    auto e = entry(genesis.chain_id);
    if (!e || e->status == ChainStatus::dropped) {
        ChainRegistryEntry fresh;
        fresh.chain_id = genesis.chain_id;
        fresh.owner_pub = info->owner_pub;
        fresh.label = e ? e->label : info->label;
        if (auto st = follow_chain(std::move(fresh)); !st) return st.error();
    }
    std::size_t appended = 0;
    for (const auto& block : *blocks) {
        auto outcome = append_block(block);
        if (!outcome) return outcome.error();
        if (*outcome == AppendOutcome::equivocation)
            return make_error(Errc::chain_banned, "import revealed equivocation at height " +
                                                      std::to_string(block.height));
        if (*outcome == AppendOutcome::appended) ++appended;
    }
    return appended;
}

void ChainStore::add_append_hook(AppendHook hook) {
    std::lock_guard lock(hooks_mutex_);
    append_hooks_.push_back(std::move(hook));
}

void ChainStore::add_ban_hook(BanHook hook) {
    std::lock_guard lock(hooks_mutex_);
    ban_hooks_.push_back(std::move(hook));
}

}  // namespace infnote::chainstore
