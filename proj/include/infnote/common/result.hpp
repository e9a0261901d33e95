#pragma once

#include <cassert>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace infnote {

/// Stable error codes. The kebab-case names returned by errc_name() are part of
/// the CLI and wire contracts and must not change.
enum class Errc {
    invalid_seed,
    invalid_key,
    payload_too_large,
    wrong_owner,
    bad_chain_id,
    bad_hash,
    bad_signature,
    bad_height,
    bad_time,
    bad_prev_hash,
    bad_chain,
    bad_genesis,
    malformed_block,
    unknown_chain,
    chain_banned,
    chain_dropped,
    invalid_evidence,
    invalid_entry,
    decode_error,
    oversize_content,
    bad_schema,
    bad_json,
    unknown_type,
    bad_version,
    version_mismatch,
    not_found,
    io_error,
    bootstrap_failed,
    invalid_topology,
    invalid_argument,
    bind_failed,
    not_served,
};

std::string_view errc_name(Errc code);

struct Error {
    Errc code;
    std::string detail;

    std::string message() const {
        std::string out{errc_name(code)};
        if (!detail.empty()) {
            out += ": ";
            out += detail;
        }
        return out;
    }
};

inline Error make_error(Errc code, std::string detail = {}) {
    return Error{code, std::move(detail)};
}

/// Value-or-error. Deliberately small: the project only needs construction,
/// inspection and unchecked access after a check.
template <typename T>
class Result {
public:
    Result(T value) : data_(std::move(value)) {}
    Result(Error error) : data_(std::move(error)) {}

    bool ok() const { return data_.index() == 0; }
    explicit operator bool() const { return ok(); }

    T& value() & {
        assert(ok());
        return std::get<0>(data_);
    }
    const T& value() const& {
        assert(ok());
        return std::get<0>(data_);
    }
    T&& value() && {
        assert(ok());
        return std::get<0>(std::move(data_));
    }

    const Error& error() const {
        assert(!ok());
        return std::get<1>(data_);
    }
    Errc code() const { return error().code; }

    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

private:
    std::variant<T, Error> data_;
};

template <>
class Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)), failed_(true) {}

    bool ok() const { return !failed_; }
    explicit operator bool() const { return ok(); }

    const Error& error() const {
        assert(failed_);
        return error_;
    }
    Errc code() const { return error().code; }

private:
    Error error_{};
    bool failed_ = false;
};

using Status = Result<void>;

}  // namespace infnote
