#pragma once

#include "test_support.hpp"

#include "infnote/peernet/peer_node.hpp"

#include <deque>
#include <map>
#include <memory>

namespace infnote::testing {

/// In-process network of PeerNodes over encoded frames, delivered FIFO.
class MiniNet {
public:
    struct Sent {
        std::size_t from;
        peernet::SessionId session;
        std::string type;
    };

    struct Node;

    class Transport : public peernet::PeerTransport {
    public:
        Transport(MiniNet& net, std::size_t self) : net_(net), self_(self) {}
        void send(peernet::SessionId session, const wire::Message& message) override {
            net_.log.push_back({self_, session, std::string(wire::message_type(message))});
            net_.frames_.push_back({self_, session, wire::encode_message(message)});
        }
        void close(peernet::SessionId session) override { net_.closes_.push_back({self_, session}); }

    private:
        MiniNet& net_;
        std::size_t self_;
    };

    struct Node {
        std::unique_ptr<TempDir> dir;
        std::unique_ptr<chainstore::ChainStore> store;
        std::unique_ptr<peernet::BlockLedger> ledger;
        std::unique_ptr<peernet::AddressBook> book;
        std::unique_ptr<Transport> transport;
        std::unique_ptr<peernet::PeerNode> peer;
    };

    /// Full node backed by a fresh store that follows `chains`.
    std::size_t add_full(const std::vector<chaincore::KeyPair>& chains, peernet::PeerNodeConfig config = {}) {
        Node n;
        n.dir = std::make_unique<TempDir>();
        n.store = chainstore::ChainStore::open(n.dir->path()).value();
        for (const auto& owner : chains) {
            chainstore::ChainRegistryEntry e;
            e.chain_id = chain_of(owner);
            e.owner_pub = owner.public_key;
            e.label = "test";
            n.store->follow_chain(e).ok();
        }
        n.ledger = std::make_unique<peernet::StoreLedger>(*n.store);
        return add(std::move(n), config);
    }

    std::size_t add(Node n, peernet::PeerNodeConfig config = {}) {
        const std::size_t index = nodes.size();
        n.book = std::make_unique<peernet::AddressBook>();
        n.transport = std::make_unique<Transport>(*this, index);
        n.peer = std::make_unique<peernet::PeerNode>(config, *n.ledger, *n.transport, n.book.get());
        nodes.push_back(std::move(n));
        return index;
    }

    /// a dials b. Returns a's session id for the link.
    peernet::SessionId connect(std::size_t a, std::size_t b) {
        const peernet::SessionId sa = next_session_++;
        const peernet::SessionId sb = next_session_++;
        links_[{a, sa}] = {b, sb};
        links_[{b, sb}] = {a, sa};
        nodes[b].peer->on_session_open(sb, false, wire::PeerAddress{"node" + std::to_string(a), 1, 0, 0});
        nodes[a].peer->on_session_open(sa, true, wire::PeerAddress{"node" + std::to_string(b), 1, 0, 0});
        return sa;
    }

    /// Peer-side session id of a link.
    peernet::SessionId remote_session(std::size_t node, peernet::SessionId session) const {
        return links_.at({node, session}).second;
    }

    std::size_t pump(std::size_t limit = 1'000'000) {
        std::size_t delivered = 0;
        while ((!frames_.empty() || !closes_.empty()) && delivered < limit) {
            if (!closes_.empty()) {
                auto [node, session] = closes_.front();
                closes_.pop_front();
                auto it = links_.find({node, session});
                if (it == links_.end()) continue;
                auto [peer, peer_session] = it->second;
                links_.erase(it);
                links_.erase({peer, peer_session});
                nodes[node].peer->on_session_closed(session);
                nodes[peer].peer->on_session_closed(peer_session);
                continue;
            }
            auto frame = std::move(frames_.front());
            frames_.pop_front();
            auto it = links_.find({frame.from, frame.session});
            if (it == links_.end()) continue;
            ++delivered;
            nodes[it->second.first].peer->on_frame(it->second.second, frame.text);
        }
        return delivered;
    }

    std::size_t count_sent(std::size_t from, std::string_view type) const {
        std::size_t n = 0;
        for (const auto& s : log)
            if (s.from == from && s.type == type) ++n;
        return n;
    }

    std::vector<Node> nodes;
    std::vector<Sent> log;

private:
    struct Frame {
        std::size_t from;
        peernet::SessionId session;
        std::string text;
    };
    std::deque<Frame> frames_;
    std::deque<std::pair<std::size_t, peernet::SessionId>> closes_;
    std::map<std::pair<std::size_t, peernet::SessionId>, std::pair<std::size_t, peernet::SessionId>> links_;
    peernet::SessionId next_session_ = 1;
};

}  // namespace infnote::testing
