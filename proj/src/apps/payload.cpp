#include "infnote/apps/payload.hpp"

#include "infnote/chaincore/block.hpp"

#include <string_view>

namespace infnote::apps {

using nlohmann::json;

namespace {

Error decode_error(std::string detail) { return make_error(Errc::decode_error, std::move(detail)); }

bool only_keys(const json& obj, std::initializer_list<std::string_view> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto key : allowed)
            if (it.key() == key) known = true;
        if (!known) return false;
    }
    return true;
}

template <std::size_t N>
std::optional<ByteArray<N>> hex_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return array_from_hex<N>(it->get_ref<const std::string&>());
}

const std::string* string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return nullptr;
    return &it->get_ref<const std::string&>();
}

Result<RecordBody> body_from_json(std::string_view kind, const json& body) {
    if (!body.is_object()) return decode_error("body must be an object");
    if (kind == "post") {
        if (!only_keys(body, {"client_time", "content", "post_id", "reply_to"}))
            return decode_error("unexpected key in post body");
        PostBody post;
        auto id = hex_field<32>(body, "post_id");
        const auto* content = string_field(body, "content");
        auto time = body.find("client_time");
        if (!id || !content || time == body.end() || !time->is_number_unsigned())
            return decode_error("post body needs post_id, content and client_time");
        post.post_id = *id;
        post.content = *content;
        post.client_time = time->get<std::uint64_t>();
        if (body.contains("reply_to")) {
            auto reply = hex_field<32>(body, "reply_to");
            if (!reply) return decode_error("reply_to must be a 32-byte hex digest");
            post.reply_to = *reply;
        }
        return RecordBody{std::move(post)};
    }
    if (kind == "delete_marker") {
        if (!only_keys(body, {"target"})) return decode_error("unexpected key in delete_marker body");
        auto target = hex_field<32>(body, "target");
        if (!target) return decode_error("delete_marker needs a target");
        return RecordBody{DeleteBody{*target}};
    }
    if (kind == "identity") {
        if (!only_keys(body, {"name", "profile"})) return decode_error("unexpected key in identity body");
        const auto* name = string_field(body, "name");
        if (!name) return decode_error("identity needs a name");
        IdentityBody id{*name, std::nullopt};
        if (body.contains("profile")) {
            const auto* profile = string_field(body, "profile");
            if (!profile) return decode_error("profile must be a string");
            id.profile = *profile;
        }
        return RecordBody{std::move(id)};
    }
    return decode_error("unknown record kind");
}

// End of the JSON object starting at `start`, tracking strings and nesting.
std::size_t object_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i + 1;
    }
    return std::string_view::npos;
}

}  // namespace

Result<ChainRecord> record_from_json(const json& value) {
    if (!value.is_object()) return decode_error("record must be an object");
    if (!only_keys(value, {"author_pub", "author_sig", "body", "kind"})) return decode_error("unexpected record key");
    auto pub = hex_field<33>(value, "author_pub");
    auto sig = hex_field<64>(value, "author_sig");
    const auto* kind = string_field(value, "kind");
    auto body = value.find("body");
    if (!pub || !sig || !kind || body == value.end())
        return decode_error("record needs author_pub, author_sig, body and kind");
    auto parsed = body_from_json(*kind, *body);
    if (!parsed) return parsed.error();
    return ChainRecord{*pub, std::move(*parsed), *sig};
}

Result<ChainRecord> parse_record(std::string_view text) {
    auto doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) return decode_error("record is not valid JSON");
    return record_from_json(doc);
}

json record_to_json_value(const ChainRecord& record) { return json::parse(record_to_json(record)); }

std::size_t payload_size_for(std::span<const std::size_t> record_sizes) {
    std::size_t total = 2;
    for (std::size_t i = 0; i < record_sizes.size(); ++i) total += record_sizes[i] + (i ? 1 : 0);
    return total;
}

Result<Bytes> encode_payload(std::span<const ChainRecord> records) {
    std::string text = "[";
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i) text.push_back(',');
        text += record_to_json(records[i]);
        if (text.size() + 1 > chaincore::kMaxPayloadBytes)
            return make_error(Errc::payload_too_large, "records exceed 1 MiB");
    }
    text.push_back(']');
    if (text.size() > chaincore::kMaxPayloadBytes) return make_error(Errc::payload_too_large, "records exceed 1 MiB");
    return Bytes(text.begin(), text.end());
}

Result<std::vector<ChainRecord>> decode_payload(ByteView payload) {
    auto doc = json::parse(as_chars(payload), nullptr, false);
    if (doc.is_discarded()) return decode_error("payload is not valid JSON");
    if (!doc.is_array()) return decode_error("payload must be a JSON array");
    std::vector<ChainRecord> out;
    out.reserve(doc.size());
    for (const auto& element : doc) {
        auto record = record_from_json(element);
        if (!record) return record.error();
        out.push_back(std::move(*record));
    }
    return out;
}

std::vector<ChainRecord> decode_payload_lenient(ByteView payload, std::size_t* skipped) {
    std::size_t dropped = 0;
    std::vector<ChainRecord> out;
    auto doc = json::parse(as_chars(payload), nullptr, false);
    if (!doc.is_discarded()) {
        if (doc.is_array()) {
            out.reserve(doc.size());
            for (const auto& element : doc) {
                auto record = record_from_json(element);
                if (record)
                    out.push_back(std::move(*record));
                else
                    ++dropped;
            }
        }
    } else {
        // Quotes inside string values are always escaped in canonical text, so
        // this prefix only occurs where a record begins.
        static constexpr std::string_view kStart = R"({"author_pub":")";
        const std::string_view text = as_chars(payload);
        std::size_t pos = text.find(kStart);
        while (pos != std::string_view::npos) {
            const std::size_t end = object_end(text, pos);
            auto record = end == std::string_view::npos ? Result<ChainRecord>(decode_error("unterminated"))
                                                        : parse_record(text.substr(pos, end - pos));
            if (record)
                out.push_back(std::move(*record));
            else
                ++dropped;
            pos = text.find(kStart, pos + 1);
        }
    }
    if (skipped) *skipped += dropped;
    return out;
}

}  // namespace infnote::apps
