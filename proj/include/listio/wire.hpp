#pragma once

// Binary message formats between clients, the manager and the I/O daemons.
// Byte-level layout is documented in PROTOCOL.md. All integers are
// little-endian and fixed width.

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "listio/error.hpp"
#include "listio/region.hpp"

namespace listio::wire {

inline constexpr std::uint32_t kMagic = 0x50564C31;
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::size_t kRegionEntrySize = 16;
inline constexpr std::uint32_t kMaxListRegions = 64;
inline constexpr std::size_t kResponsePrefixSize = 20;
inline constexpr std::size_t kEthernetFrame = 1500;
// Upper bound on any single message body; larger claims are rejected unread.
inline constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;

enum class Opcode : std::uint16_t {
    create = 1,
    open = 2,
    close = 3,
    read = 4,
    write = 5,
    read_list = 6,
    write_list = 7,
    token_acquire = 8,
    token_release = 9,
    stat = 10,
    register_server = 11,
};

inline bool is_known_opcode(std::uint16_t v) noexcept { return v >= 1 && v <= 11; }

inline bool is_list_opcode(Opcode op) noexcept {
    return op == Opcode::read_list || op == Opcode::write_list;
}

/// Number of body bytes that follow the header and trailing regions.
inline bool carries_payload(Opcode op) noexcept {
    return op == Opcode::write || op == Opcode::write_list || op == Opcode::create ||
           op == Opcode::open || op == Opcode::register_server;
}

struct RequestHeader {
    Opcode opcode = Opcode::read;
    std::uint64_t request_id = 0;
    std::uint64_t file_handle = 0;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint32_t region_count = 0;
    std::uint32_t flags = 0;

    friend bool operator==(const RequestHeader&, const RequestHeader&) = default;
};

enum class Status : std::uint32_t {
    ok = 0,
    not_found = 1,
    exists = 2,
    protocol_error = 3,
    io_error = 4,
    invalid_argument = 5,
    shutting_down = 6,
};

inline ErrorCode to_error_code(Status s) noexcept {
    switch (s) {
        case Status::not_found: return ErrorCode::not_found;
        case Status::exists: return ErrorCode::exists;
        case Status::protocol_error: return ErrorCode::protocol;
        case Status::invalid_argument: return ErrorCode::invalid_argument;
        default: return ErrorCode::io;
    }
}

inline Status to_status(ErrorCode c) noexcept {
    switch (c) {
        case ErrorCode::not_found: return Status::not_found;
        case ErrorCode::exists: return Status::exists;
        case ErrorCode::protocol: return Status::protocol_error;
        case ErrorCode::invalid_argument:
        case ErrorCode::plan_invalid:
        case ErrorCode::spec: return Status::invalid_argument;
        case ErrorCode::io: return Status::io_error;
    }
    return Status::io_error;
}

// ---------------------------------------------------------------------------
// Little-endian primitives

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void zeros(std::size_t n) { out_.insert(out_.end(), n, std::byte{0}); }
    void bytes(std::span<const std::byte> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void text(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(std::as_bytes(std::span(s.data(), s.size())));
    }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::byte>(v >> (8 * i)));
    }
    std::vector<std::byte>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::span<const std::byte> bytes(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string text() {
        const auto n = u32();
        auto b = bytes(n);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    std::span<const std::byte> rest() const noexcept { return in_.subspan(pos_); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw Error(ErrorCode::protocol, "truncated message");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= std::uint64_t(std::to_integer<std::uint8_t>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Requests

inline void check_region_count(Opcode op, std::uint32_t count) {
    if (is_list_opcode(op)) {
        if (count < 1 || count > kMaxListRegions)
            throw Error(ErrorCode::protocol,
                        "list request region_count " + std::to_string(count) + " outside [1,64]");
    } else if (count != 0) {
        throw Error(ErrorCode::protocol, "region_count must be 0 for contiguous operations");
    }
}

inline std::size_t encoded_request_size(std::uint32_t region_count) noexcept {
    return kHeaderSize + kRegionEntrySize * region_count;
}

inline void append_request(std::vector<std::byte>& out, const RequestHeader& h,
                           std::span<const Region> trailing) {
    if (trailing.size() > kMaxListRegions)
        throw Error(ErrorCode::protocol, "more than 64 trailing regions; batch first");
    if (h.region_count != trailing.size())
        throw Error(ErrorCode::protocol, "region_count disagrees with trailing regions");
    check_region_count(h.opcode, h.region_count);
    out.reserve(out.size() + encoded_request_size(h.region_count));
    ByteWriter w(out);
    w.u32(kMagic);
    w.u16(kVersion);
    w.u16(static_cast<std::uint16_t>(h.opcode));
    w.u64(h.request_id);
    w.u64(h.file_handle);
    w.u64(h.offset);
    w.u64(h.length);
    w.u32(h.region_count);
    w.u32(h.flags);
    w.zeros(kHeaderSize - 48);
    for (const auto& r : trailing) {
        w.u64(r.offset);
        w.u64(r.length);
    }
}

inline std::vector<std::byte> encode_request(const RequestHeader& h,
                                             std::span<const Region> trailing = {}) {
    std::vector<std::byte> out;
    append_request(out, h, trailing);
    return out;
}

/// Decodes and validates the fixed 64-byte header only.
inline RequestHeader decode_request_header(std::span<const std::byte> bytes) {
    if (bytes.size() < kHeaderSize) throw Error(ErrorCode::protocol, "truncated request header");
    ByteReader r(bytes.first(kHeaderSize));
    if (r.u32() != kMagic) throw Error(ErrorCode::protocol, "bad magic");
    if (r.u16() != kVersion) throw Error(ErrorCode::protocol, "unsupported version");
    const auto op = r.u16();
    if (!is_known_opcode(op)) throw Error(ErrorCode::protocol, "unknown opcode " + std::to_string(op));
    RequestHeader h;
    h.opcode = static_cast<Opcode>(op);
    h.request_id = r.u64();
    h.file_handle = r.u64();
    h.offset = r.u64();
    h.length = r.u64();
    h.region_count = r.u32();
    h.flags = r.u32();
    check_region_count(h.opcode, h.region_count);
    if (carries_payload(h.opcode) && h.length > kMaxPayload)
        throw Error(ErrorCode::protocol, "payload length exceeds limit");
    return h;
}

inline RegionList decode_trailing(std::span<const std::byte> bytes, std::uint32_t count) {
    if (bytes.size() < kRegionEntrySize * count)
        throw Error(ErrorCode::protocol, "truncated trailing region list");
    ByteReader r(bytes);
    RegionList regions(count);
    for (auto& reg : regions) {
        reg.offset = r.u64();
        reg.length = r.u64();
    }
    return regions;
}

struct DecodedRequest {
    RequestHeader header;
    std::optional<RegionList> trailing;
    std::span<const std::byte> payload;  // body bytes following the trailing data
};

inline std::uint64_t payload_size(const RequestHeader& h) noexcept {
    return carries_payload(h.opcode) ? h.length : 0;
}

/// Decodes a complete request frame: header, trailing regions and body.
inline DecodedRequest decode_request(std::span<const std::byte> bytes) {
    DecodedRequest d;
    d.header = decode_request_header(bytes);
    auto rest = bytes.subspan(kHeaderSize);
    if (d.header.region_count > 0) {
        d.trailing = decode_trailing(rest, d.header.region_count);
        rest = rest.subspan(kRegionEntrySize * d.header.region_count);
    }
    const auto body = payload_size(d.header);
    if (rest.size() < body) throw Error(ErrorCode::protocol, "truncated request payload");
    d.payload = rest.first(body);
    return d;
}

// ---------------------------------------------------------------------------
// Responses

struct ResponsePrefix {
    std::uint64_t request_id = 0;
    Status status = Status::ok;
    std::uint64_t payload_length = 0;

    friend bool operator==(const ResponsePrefix&, const ResponsePrefix&) = default;
};

struct Response {
    std::uint64_t request_id = 0;
    Status status = Status::ok;
    std::vector<std::byte> payload;

    friend bool operator==(const Response&, const Response&) = default;
};

inline void append_response_prefix(std::vector<std::byte>& out, const ResponsePrefix& p) {
    ByteWriter w(out);
    w.u64(p.request_id);
    w.u32(static_cast<std::uint32_t>(p.status));
    w.u64(p.payload_length);
}

inline std::vector<std::byte> encode_response(const Response& r) {
    std::vector<std::byte> out;
    out.reserve(kResponsePrefixSize + r.payload.size());
    append_response_prefix(out, {r.request_id, r.status, r.payload.size()});
    out.insert(out.end(), r.payload.begin(), r.payload.end());
    return out;
}

inline ResponsePrefix decode_response_prefix(std::span<const std::byte> bytes) {
    if (bytes.size() < kResponsePrefixSize) throw Error(ErrorCode::protocol, "truncated response");
    ByteReader r(bytes);
    ResponsePrefix p;
    p.request_id = r.u64();
    const auto status = r.u32();
    if (status > static_cast<std::uint32_t>(Status::shutting_down))
        throw Error(ErrorCode::protocol, "unknown response status");
    p.status = static_cast<Status>(status);
    p.payload_length = r.u64();
    if (p.payload_length > kMaxPayload) throw Error(ErrorCode::protocol, "response payload too large");
    return p;
}

inline Response decode_response(std::span<const std::byte> bytes) {
    const auto p = decode_response_prefix(bytes);
    auto rest = bytes.subspan(kResponsePrefixSize);
    if (rest.size() < p.payload_length) throw Error(ErrorCode::protocol, "truncated response payload");
    Response r{p.request_id, p.status, {}};
    r.payload.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(p.payload_length));
    return r;
}

/// Throws the error carried by a non-ok response.
inline void check_ok(const Response& r, std::string_view context) {
    if (r.status == Status::ok) return;
    std::string msg(context);
    if (!r.payload.empty())
        msg += ": " + std::string(reinterpret_cast<const char*>(r.payload.data()), r.payload.size());
    throw Error(to_error_code(r.status), msg);
}

// ---------------------------------------------------------------------------
// Message bodies for metadata operations

struct FileMetadata {
    std::uint64_t handle = 0;
    std::string name;
    StripingParams striping;
    std::uint64_t size = 0;
    std::vector<std::string> roster;

    friend bool operator==(const FileMetadata&, const FileMetadata&) = default;
};

inline std::vector<std::byte> encode_metadata(const FileMetadata& m) {
    std::vector<std::byte> out;
    ByteWriter w(out);
    w.u64(m.handle);
    w.u32(m.striping.base);
    w.u32(m.striping.pcount);
    w.u64(m.striping.ssize);
    w.u64(m.size);
    w.text(m.name);
    w.u32(static_cast<std::uint32_t>(m.roster.size()));
    for (const auto& a : m.roster) w.text(a);
    return out;
}

inline FileMetadata decode_metadata(std::span<const std::byte> bytes) {
    ByteReader r(bytes);
    FileMetadata m;
    m.handle = r.u64();
    m.striping.base = r.u32();
    m.striping.pcount = r.u32();
    m.striping.ssize = r.u64();
    m.size = r.u64();
    m.name = r.text();
    const auto n = r.u32();
    if (n > r.remaining() / 4) throw Error(ErrorCode::protocol, "roster count exceeds message");
    m.roster.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) m.roster.push_back(r.text());
    return m;
}

/// CREATE body: base, pcount, ssize, then the raw name bytes.
inline std::vector<std::byte> encode_create_body(std::string_view name, const StripingParams& sp) {
    std::vector<std::byte> out;
    ByteWriter w(out);
    w.u32(sp.base);
    w.u32(sp.pcount);
    w.u64(sp.ssize);
    w.bytes(std::as_bytes(std::span(name.data(), name.size())));
    return out;
}

inline std::pair<std::string, StripingParams> decode_create_body(std::span<const std::byte> bytes) {
    ByteReader r(bytes);
    StripingParams sp;
    sp.base = r.u32();
    sp.pcount = r.u32();
    sp.ssize = r.u64();
    auto rest = r.rest();
    return {std::string(reinterpret_cast<const char*>(rest.data()), rest.size()), sp};
}

inline std::vector<std::byte> encode_u64(std::uint64_t v) {
    std::vector<std::byte> out;
    ByteWriter(out).u64(v);
    return out;
}

inline std::uint64_t decode_u64(std::span<const std::byte> bytes) { return ByteReader(bytes).u64(); }

inline std::vector<std::byte> text_bytes(std::string_view s) {
    auto b = std::as_bytes(std::span(s.data(), s.size()));
    return {b.begin(), b.end()};
}

inline std::string bytes_text(std::span<const std::byte> b) {
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace listio::wire
