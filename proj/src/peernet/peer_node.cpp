#include "infnote/peernet/peer_node.hpp"

#include "infnote/apps/payload.hpp"

#include <algorithm>
#include <chrono>

namespace infnote::peernet {

using namespace wire;

PeerNode::PeerNode(PeerNodeConfig config, BlockLedger& ledger, PeerTransport& transport, AddressBook* book,
                   apps::SignatureCache* cache, Clock clock)
    : config_(config),
      ledger_(ledger),
      transport_(transport),
      book_(book),
      cache_(cache),
      clock_(std::move(clock)),
      seen_(config.seen_capacity),
      seen_records_(std::max<std::size_t>(config.seen_capacity, 4096) * 4),
      pool_(config.pool_bytes) {
    if (!clock_) {
        clock_ = [] {
            return static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
                    .count());
        };
    }
}

Hello PeerNode::local_hello() const {
    Hello h;
    h.node_kind = config_.kind;
    h.chain_heads = ledger_.heads();
    h.listen_port = config_.listen_port;
    return h;
}

void PeerNode::send(SessionId session, const Message& message) {
    ++stats_.messages_out;
    transport_.send(session, message);
}

void PeerNode::penalize(SessionId session) {
    ++stats_.penalties;
    auto it = sessions_.find(session);
    if (it == sessions_.end() || !book_) return;
    const auto& remote = it->second.info.remote;
    if (remote) book_->record_failure(remote->host, remote->port);
}

void PeerNode::on_session_open(SessionId session, bool outbound, std::optional<PeerAddress> remote) {
    Session s;
    s.info.id = session;
    s.info.outbound = outbound;
    s.info.remote = std::move(remote);
    sessions_[session] = std::move(s);
    if (outbound) send(session, local_hello());
}

void PeerNode::on_session_closed(SessionId session) {
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    std::vector<ChainId> orphaned;
    for (const auto& [chain, owner] : sync_owner_)
        if (owner == session) orphaned.push_back(chain);
    sessions_.erase(it);
    for (const auto& chain : orphaned) {
        sync_owner_.erase(chain);
        resume_sync(chain);
    }
}

void PeerNode::on_frame(SessionId session, std::string_view text) {
    ++stats_.frames_in;
    auto message = decode_message(text);
    if (!message) {
        penalize(session);
        send(session, error_message(message.error()));
        return;
    }
    on_message(session, *message);
}

void PeerNode::on_message(SessionId session, const Message& message) {
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    Session& s = it->second;

    if (const auto* hello = std::get_if<Hello>(&message)) return handle_hello(s, *hello, false);
    if (const auto* ack = std::get_if<HelloAck>(&message)) return handle_hello(s, *ack, true);
    if (const auto* err = std::get_if<ErrorMessage>(&message)) return handle_error(s, *err);
    if (!s.info.established) {
        // Everything else requires a completed handshake.
        penalize(session);
        transport_.close(session);
        return;
    }
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GetPeers>) {
                Peers reply;
                if (book_) {
                    for (const auto& a : book_->candidates()) {
                        if (book_->is_demoted(a) || reply.addresses.size() >= config_.max_shared_peers) break;
                        reply.addresses.push_back({a.host, a.port, a.last_seen, 0});
                    }
                }
                send(session, reply);
            } else if constexpr (std::is_same_v<T, Peers>) {
                if (book_)
                    for (const auto& a : m.addresses) book_->add({a.host, a.port, a.last_seen, 0});
                if (peers_listener_) peers_listener_(m.addresses);
            } else if constexpr (std::is_same_v<T, GetBlocks>) {
                handle_get_blocks(s, m);
            } else if constexpr (std::is_same_v<T, Blocks>) {
                handle_blocks(s, m);
            } else if constexpr (std::is_same_v<T, NewBlock>) {
                handle_new_block(s, m.block);
            } else if constexpr (std::is_same_v<T, SubmitRecords>) {
                submit_records(session, m.chain_id, m.records);
            }
        },
        message);
}

void PeerNode::handle_hello(Session& s, const Hello& hello, bool is_ack) {
    if (s.info.established) return;
    if (is_ack != s.info.outbound) {
        // An ack on an inbound session or a hello on an outbound one.
        penalize(s.info.id);
        return;
    }
    HandshakeState local{local_hello(), ledger_.followed()};
    auto outcome = evaluate_hello(local, hello);
    if (!outcome) {
        send(s.info.id, error_message(outcome.error()));
        transport_.close(s.info.id);
        return;
    }
    if (!is_ack) {
        HelloAck ack;
        static_cast<Hello&>(ack) = local.hello;
        send(s.info.id, ack);
    }
    establish(s, *outcome);
}

void PeerNode::establish(Session& s, const HandshakeOutcome& outcome) {
    s.info.established = true;
    s.info.peer_kind = outcome.peer_kind;
    for (const auto& head : outcome.peer_heads) s.info.peer_heads[head.chain_id] = head.height;
    if (s.info.remote && outcome.peer_listen_port && !s.info.outbound) s.info.remote->port = *outcome.peer_listen_port;
    if (book_ && s.info.remote && (s.info.outbound || outcome.peer_listen_port))
        book_->record_success(s.info.remote->host, s.info.remote->port, clock_());

    const SessionId id = s.info.id;
    for (const auto& c : outcome.candidates) {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return;
        start_sync(it->second, c.chain_id, c.from, c.peer_height);
    }
    if (book_ && established_count() < config_.min_peers) send(id, GetPeers{});
}

void PeerNode::handle_get_blocks(Session& s, const GetBlocks& request) {
    if (!ledger_.serves_sync()) {
        send(s.info.id, error_message(make_error(Errc::not_served, "light nodes do not serve blocks")));
        return;
    }
    if (request.to < request.from || ledger_.is_banned(request.chain_id)) {
        send(s.info.id, Blocks{request.chain_id, {}});
        return;
    }
    const std::uint64_t to = std::min<std::uint64_t>(request.to, request.from + config_.sync_window - 1);
    auto blocks = ledger_.range(request.chain_id, request.from, to);
    if (!blocks || blocks->empty()) {
        send(s.info.id, Blocks{request.chain_id, {}});
        return;
    }
    // One message per request; the requester asks again from where it ends.
    auto chunks = chunk_blocks(request.chain_id, std::move(*blocks), config_.sync_frame_budget);
    send(s.info.id, chunks.front());
}

void PeerNode::start_sync(Session& s, const ChainId& chain_id, std::uint64_t from, std::uint64_t peer_height) {
    if (s.info.peer_kind == NodeKind::light || s.sync_failed.count(chain_id)) return;
    if (!ledger_.followed().count(chain_id)) return;
    from = std::max(from, ledger_.sync_from(chain_id, peer_height));
    if (from > peer_height) return;
    if (auto owner = sync_owner_.find(chain_id); owner != sync_owner_.end() && owner->second != s.info.id) {
        // Another session is already syncing this chain.
        return;
    }
    auto& state = s.syncs[chain_id];
    state.first = std::max(state.first, from);
    state.second = std::max(state.second, peer_height);
    const bool idle = !sync_owner_.count(chain_id);
    sync_owner_[chain_id] = s.info.id;
    if (idle) request_window(s, chain_id);
}

void PeerNode::request_window(Session& s, const ChainId& chain_id) {
    auto& [next, target] = s.syncs[chain_id];
    const std::uint64_t to = std::min<std::uint64_t>(target, next + config_.sync_window - 1);
    ++stats_.sync_requests;
    send(s.info.id, GetBlocks{chain_id, next, to});
}

void PeerNode::finish_sync(Session& s, const ChainId& chain_id) {
    s.syncs.erase(chain_id);
    if (auto owner = sync_owner_.find(chain_id); owner != sync_owner_.end() && owner->second == s.info.id)
        sync_owner_.erase(owner);
    drain_pending(chain_id);
    if (pending_.count(chain_id)) resume_sync(chain_id);
}

void PeerNode::resume_sync(const ChainId& chain_id) {
    if (sync_owner_.count(chain_id) || ledger_.is_banned(chain_id)) return;
    const std::uint64_t next = ledger_.next_height(chain_id);
    for (auto& [id, s] : sessions_) {
        if (!s.info.established || s.info.peer_kind == NodeKind::light || s.sync_failed.count(chain_id)) continue;
        auto head = s.info.peer_heads.find(chain_id);
        if (head != s.info.peer_heads.end() && head->second >= next) {
            start_sync(s, chain_id, next, head->second);
            return;
        }
    }
}

void PeerNode::handle_blocks(Session& s, const Blocks& message) {
    const ChainId& chain_id = message.chain_id;
    auto sync = s.syncs.find(chain_id);
    if (message.blocks.empty()) {
        if (sync != s.syncs.end()) finish_sync(s, chain_id);
        return;
    }
    if (!ledger_.followed().count(chain_id)) return;
    const SessionId id = s.info.id;
    for (const auto& block : message.blocks) {
        if (ledger_.is_banned(chain_id)) break;
        auto outcome = ledger_.append(block);
        if (!outcome) {
            penalize(id);
            s.sync_failed.insert(chain_id);
            if (sync != s.syncs.end()) finish_sync(s, chain_id);
            resume_sync(chain_id);
            return;
        }
        if (*outcome == AppendOutcome::appended) after_append(block, id);
        if (*outcome == AppendOutcome::equivocation) {
            if (sync != s.syncs.end()) finish_sync(s, chain_id);
            return;
        }
    }
    if (sync == s.syncs.end()) return;
    auto& head = s.info.peer_heads[chain_id];
    head = std::max(head, message.blocks.back().height);
    sync->second.first = std::max(sync->second.first, message.blocks.back().height + 1);
    sync->second.first = std::max(sync->second.first, ledger_.next_height(chain_id));
    if (sync->second.first <= sync->second.second)
        request_window(s, chain_id);
    else
        finish_sync(s, chain_id);
}

void PeerNode::handle_new_block(Session& s, const Block& block) {
    const ChainId& chain_id = block.chain_id;
    if (!ledger_.followed().count(chain_id) || ledger_.is_banned(chain_id) || seen_.contains(block.hash)) {
        ++stats_.blocks_ignored;
        return;
    }
    auto& head = s.info.peer_heads[chain_id];
    head = std::max(head, block.height);
    const SessionId id = s.info.id;

    const std::uint64_t next = ledger_.next_height(chain_id);
    if (block.height > next) {
        auto& pending = pending_[chain_id];
        if (pending.size() < config_.reorder_capacity) pending.try_emplace(block.height, block, id);
        start_sync(s, chain_id, next, block.height - 1);
        return;
    }
    auto outcome = ledger_.append(block);
    if (!outcome) {
        ++stats_.blocks_ignored;
        penalize(id);
        return;
    }
    switch (*outcome) {
        case AppendOutcome::appended:
            after_append(block, id);
            drain_pending(chain_id);
            break;
        case AppendOutcome::duplicate:
            seen_.insert(block.hash);
            ++stats_.blocks_ignored;
            break;
        case AppendOutcome::equivocation:
            // The chain is now banned; the conflicting block is not relayed.
            pending_.erase(chain_id);
            break;
    }
}

void PeerNode::handle_error(Session& s, const ErrorMessage& error) {
    if (error.code == "version-mismatch") {
        transport_.close(s.info.id);
        return;
    }
    if (error.code == "not-served") {
        // The peer will not help with sync; hand every chain it owned to someone else.
        s.info.peer_kind = NodeKind::light;
        std::vector<ChainId> chains;
        for (const auto& [chain, state] : s.syncs) chains.push_back(chain);
        for (const auto& chain : chains) {
            finish_sync(s, chain);
            resume_sync(chain);
        }
    }
}

void PeerNode::after_append(const Block& block, std::optional<SessionId> origin) {
    seen_.insert(block.hash);
    ++stats_.blocks_appended;
    if (pool_.count(block.chain_id) > 0 && !block.is_genesis()) {
        std::vector<Hash256> ids;
        for (const auto& r : apps::decode_payload_lenient(block.payload)) ids.push_back(apps::record_id(r));
        pool_.remove(block.chain_id, ids);
    }
    if (block_listener_) block_listener_(block);
    gossip_block(origin, block);
}

void PeerNode::drain_pending(const ChainId& chain_id) {
    auto it = pending_.find(chain_id);
    if (it == pending_.end()) return;
    auto& pending = it->second;
    while (!pending.empty()) {
        const std::uint64_t next = ledger_.next_height(chain_id);
        // Drop anything the chain has already passed.
        while (!pending.empty() && pending.begin()->first < next) pending.erase(pending.begin());
        if (pending.empty() || pending.begin()->first != next) break;
        auto [block, origin] = std::move(pending.begin()->second);
        pending.erase(pending.begin());
        auto outcome = ledger_.append(block);
        if (!outcome) {
            if (origin) penalize(*origin);
            break;
        }
        if (*outcome == AppendOutcome::appended) after_append(block, origin);
        if (*outcome == AppendOutcome::equivocation) {
            pending.clear();
            break;
        }
    }
    if (pending.empty()) pending_.erase(chain_id);
}

Result<AppendOutcome> PeerNode::publish_block(const Block& block) {
    auto outcome = ledger_.append(block);
    if (outcome && *outcome == AppendOutcome::appended) {
        after_append(block, std::nullopt);
        drain_pending(block.chain_id);
    }
    return outcome;
}

std::size_t PeerNode::gossip_block(std::optional<SessionId> origin, const Block& block) {
    if (ledger_.is_banned(block.chain_id)) return 0;
    std::size_t sent = 0;
    const Message message = NewBlock{block};
    for (auto& [id, s] : sessions_) {
        if (!s.info.established || (origin && id == *origin)) continue;
        send(id, message);
        ++sent;
    }
    stats_.new_block_sends += sent;
    return sent;
}

SubmitOutcome PeerNode::submit_records(std::optional<SessionId> origin, const ChainId& chain_id,
                                       const std::vector<nlohmann::json>& records) {
    SubmitOutcome out;
    if (ledger_.is_banned(chain_id) || !ledger_.followed().count(chain_id)) {
        const Errc code = ledger_.is_banned(chain_id) ? Errc::chain_banned : Errc::unknown_chain;
        for (std::size_t i = 0; i < records.size(); ++i) out.rejected.emplace_back(i, make_error(code));
        return out;
    }
    std::vector<nlohmann::json> forward;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto record = apps::record_from_json(records[i]);
        if (!record) {
            out.rejected.emplace_back(i, record.error());
            continue;
        }
        if (auto st = apps::verify_record(*record, cache_); !st) {
            out.rejected.emplace_back(i, st.error());
            continue;
        }
        if (!seen_records_.insert(apps::record_id(*record))) {
            ++out.duplicates;
            continue;
        }
        pool_.add(chain_id, *record);
        forward.push_back(apps::record_to_json_value(*record));
        ++out.accepted;
    }
    if (origin && !out.rejected.empty()) penalize(*origin);
    if (!forward.empty()) {
        const Message message = SubmitRecords{chain_id, std::move(forward)};
        for (auto& [id, s] : sessions_) {
            if (!s.info.established || (origin && id == *origin)) continue;
            send(id, message);
            ++stats_.records_forwarded;
        }
    }
    return out;
}

void PeerNode::request_peers() {
    for (auto& [id, s] : sessions_)
        if (s.info.established) send(id, GetPeers{});
}

std::vector<SessionInfo> PeerNode::sessions() const {
    std::vector<SessionInfo> out;
    for (const auto& [id, s] : sessions_) out.push_back(s.info);
    return out;
}

std::size_t PeerNode::established_count() const {
    return static_cast<std::size_t>(
        std::count_if(sessions_.begin(), sessions_.end(), [](const auto& p) { return p.second.info.established; }));
}

}  // namespace infnote::peernet
