#pragma once

#include "infnote/apps/record.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace infnote::apps {

/// JSON array of canonical records. Fails with payload-too-large over 1 MiB.
Result<Bytes> encode_payload(std::span<const ChainRecord> records);

/// Strict: any malformed element fails the whole payload with decode-error.
Result<std::vector<ChainRecord>> decode_payload(ByteView payload);

/// Projection-side decoder. Elements that fail to decode are counted in
/// `skipped` and dropped; the others are returned in payload order. Falls back
/// to locating records by their leading `{"author_pub":"` when the array as a
/// whole is not valid JSON, so one damaged record cannot hide its neighbours.
std::vector<ChainRecord> decode_payload_lenient(ByteView payload, std::size_t* skipped = nullptr);

Result<ChainRecord> record_from_json(const nlohmann::json& value);
Result<ChainRecord> parse_record(std::string_view text);
nlohmann::json record_to_json_value(const ChainRecord& record);

/// Size of a payload holding `record_sizes` records (brackets and commas included).
std::size_t payload_size_for(std::span<const std::size_t> record_sizes);

}  // namespace infnote::apps
