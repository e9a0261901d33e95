#pragma once

#include <string>
#include <string_view>

namespace infnote {

/// Appends `s` as a JSON string literal. Escapes exactly what JSON.stringify and
/// Python's json.dumps(ensure_ascii=False) escape, so canonical text is
/// byte-identical across implementations.
void append_json_string(std::string& out, std::string_view s);

/// True when `s` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid_utf8(std::string_view s);

}  // namespace infnote
