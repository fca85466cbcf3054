#pragma once

// Client library: file sessions, the contiguous primitives and the three
// noncontiguous strategies (multiple I/O, data sieving, list I/O).
//
// Every strategy call returns the metrics it accumulated and also adds them
// to the session's running counters (see metrics_snapshot).

#include <atomic>
#include <chrono>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "listio/error.hpp"
#include "listio/region.hpp"
#include "listio/transport.hpp"
#include "listio/wire.hpp"

namespace listio {

inline constexpr std::uint64_t kDefaultSievingBuffer = 32ull * 1024 * 1024;

enum class Direction { read, write };

/// A noncontiguous access: memory regions over a client buffer paired in
/// order with file regions. Byte k of the memory stream moves to or from byte
/// k of the file stream.
class AccessPlan {
public:
    AccessPlan() = default;

    AccessPlan(RegionList mem, RegionList file) : mem_(std::move(mem)), file_(std::move(file)) {
        check_regions(mem_, "memory list");
        check_regions(file_, "file list");
        if (!is_sorted_disjoint(file_))
            throw Error(ErrorCode::plan_invalid, "file regions must be sorted and non-overlapping");
        total_ = listio::total_length(file_);
        if (listio::total_length(mem_) != total_)
            throw Error(ErrorCode::plan_invalid, "memory and file lists differ in total length");
        for (const auto& r : mem_) mem_span_ = std::max(mem_span_, r.end());
    }

    const RegionList& mem() const noexcept { return mem_; }
    const RegionList& file() const noexcept { return file_; }
    std::uint64_t total_length() const noexcept { return total_; }
    /// Smallest buffer size that holds every memory region.
    std::uint64_t mem_span() const noexcept { return mem_span_; }
    bool empty() const noexcept { return file_.empty(); }

private:
    RegionList mem_;
    RegionList file_;
    std::uint64_t total_ = 0;
    std::uint64_t mem_span_ = 0;
};

struct SievingConfig {
    std::uint64_t buffer_size = kDefaultSievingBuffer;
};

struct ListIoConfig {
    std::uint32_t region_limit = kDefaultListLimit;

    void validate() const {
        if (region_limit < 1 || region_limit > wire::kMaxListRegions)
            throw Error(ErrorCode::invalid_argument, "list region limit must be in [1,64]");
    }
};

struct ClientMetrics {
    std::uint64_t logical_requests = 0;
    std::uint64_t server_messages = 0;
    std::uint64_t wire_bytes_read = 0;
    std::uint64_t wire_bytes_written = 0;
    std::uint64_t useful_bytes = 0;
    std::chrono::nanoseconds elapsed{0};

    ClientMetrics& operator+=(const ClientMetrics& o) noexcept {
        logical_requests += o.logical_requests;
        server_messages += o.server_messages;
        wire_bytes_read += o.wire_bytes_read;
        wire_bytes_written += o.wire_bytes_written;
        useful_bytes += o.useful_bytes;
        elapsed += o.elapsed;
        return *this;
    }

    friend ClientMetrics operator-(ClientMetrics a, const ClientMetrics& b) noexcept {
        a.logical_requests -= b.logical_requests;
        a.server_messages -= b.server_messages;
        a.wire_bytes_read -= b.wire_bytes_read;
        a.wire_bytes_written -= b.wire_bytes_written;
        a.useful_bytes -= b.useful_bytes;
        a.elapsed -= b.elapsed;
        return a;
    }
};

namespace detail {

/// Sequential copy between the plan's byte stream and the memory regions.
class MemCursor {
public:
    explicit MemCursor(std::span<const Region> mem) : mem_(mem) {}

    void scatter(std::span<const std::byte> stream, std::span<std::byte> buffer) {
        walk(stream.size(), [&](std::uint64_t mem_off, std::size_t pos, std::size_t n) {
            std::memcpy(buffer.data() + mem_off, stream.data() + pos, n);
        });
    }

    void gather(std::span<std::byte> stream, std::span<const std::byte> buffer) {
        walk(stream.size(), [&](std::uint64_t mem_off, std::size_t pos, std::size_t n) {
            std::memcpy(stream.data() + pos, buffer.data() + mem_off, n);
        });
    }

private:
    template <typename Fn>
    void walk(std::size_t count, Fn&& fn) {
        std::size_t pos = 0;
        while (pos < count) {
            const auto& r = mem_[index_];
            const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(r.length - used_, count - pos));
            fn(r.offset + used_, pos, n);
            pos += n;
            used_ += n;
            if (used_ == r.length) {
                ++index_;
                used_ = 0;
            }
        }
    }

    std::span<const Region> mem_;
    std::size_t index_ = 0;
    std::uint64_t used_ = 0;
};

inline std::uint64_t next_session_id() {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = [] {
        std::random_device rd;
        return (std::uint64_t(rd()) << 32) ^ rd();
    }();
    return salt ^ (++counter * 0x9E3779B97F4A7C15ull);
}

}  // namespace detail

class FileSession {
public:
    static FileSession create(Network& network, const std::string& manager_address,
                              const std::string& name, const StripingParams& striping) {
        FileSession s(network, manager_address);
        auto body = wire::encode_create_body(name, striping);
        s.metadata_ = wire::decode_metadata(s.manager_call(wire::Opcode::create, 0, 0, body).payload);
        return s;
    }

    static FileSession open(Network& network, const std::string& manager_address, const std::string& name) {
        FileSession s(network, manager_address);
        s.metadata_ = wire::decode_metadata(
            s.manager_call(wire::Opcode::open, 0, 0, wire::text_bytes(name)).payload);
        return s;
    }

    FileSession(FileSession&&) noexcept = default;
    FileSession& operator=(FileSession&&) noexcept = default;
    ~FileSession() = default;

    const wire::FileMetadata& metadata() const noexcept { return metadata_; }
    std::uint64_t handle() const noexcept { return metadata_.handle; }
    const StripingParams& striping() const noexcept { return metadata_.striping; }
    std::uint64_t owner_id() const noexcept { return owner_id_; }

    /// Logical file size as reported by the manager.
    std::uint64_t stat_size() {
        return wire::decode_metadata(manager_call(wire::Opcode::stat, handle(), 0, {}).payload).size;
    }

    void close() {
        if (!manager_) return;
        manager_call(wire::Opcode::close, handle(), 0, {});
        daemons_.clear();
        manager_.reset();
    }

    // -- contiguous primitives ------------------------------------------------

    std::uint64_t read(std::uint64_t file_offset, std::span<std::byte> buffer) {
        if (buffer.empty()) return 0;
        const auto t0 = Clock::now();
        ++metrics_.logical_requests;
        contig_read(file_offset, buffer);
        metrics_.useful_bytes += buffer.size();
        metrics_.elapsed += Clock::now() - t0;
        return buffer.size();
    }

    std::uint64_t write(std::uint64_t file_offset, std::span<const std::byte> buffer) {
        if (buffer.empty()) return 0;
        const auto t0 = Clock::now();
        ++metrics_.logical_requests;
        contig_write(file_offset, buffer);
        metrics_.useful_bytes += buffer.size();
        metrics_.elapsed += Clock::now() - t0;
        return buffer.size();
    }

    // -- list API ---------------------------------------------------------------

    void read_list(const AccessPlan& plan, std::span<std::byte> buffer, const ListIoConfig& cfg = {}) {
        access_list(plan, cfg, Direction::read, buffer);
    }

    void write_list(const AccessPlan& plan, std::span<const std::byte> buffer, const ListIoConfig& cfg = {}) {
        check_buffer(plan, buffer.size());
        cfg.validate();
        Timed t(*this);
        list_write(plan, buffer, cfg.region_limit);
        t.delta();
    }

    // -- strategies -------------------------------------------------------------

    /// One contiguous request per transfer piece, in plan order.
    ClientMetrics access_multiple(const AccessPlan& plan, Direction dir, std::span<std::byte> buffer) {
        check_buffer(plan, buffer.size());
        Timed t(*this);
        for_each_transfer_piece(plan.mem(), plan.file(), [&](const TransferPiece& p) {
            ++metrics_.logical_requests;
            auto mem = buffer.subspan(p.mem_offset, p.length);
            if (dir == Direction::read)
                contig_read(p.file_offset, mem);
            else
                contig_write(p.file_offset, mem);
        });
        metrics_.useful_bytes += plan.total_length();
        return t.delta();
    }

    /// Reads each sieving window holding plan bytes with one contiguous
    /// request, then extracts the plan bytes client-side.
    ClientMetrics access_sieving_read(const AccessPlan& plan, std::span<std::byte> buffer,
                                      const SievingConfig& cfg = {}) {
        check_buffer(plan, buffer.size());
        Timed t(*this);
        sieve(plan, cfg, [&](const Region& window, std::span<std::byte> sieve_buf, auto&& for_pieces) {
            ++metrics_.logical_requests;
            contig_read(window.offset, sieve_buf);
            for_pieces([&](const TransferPiece& p, std::uint64_t window_pos) {
                std::memcpy(buffer.data() + p.mem_offset, sieve_buf.data() + window_pos, p.length);
            });
        });
        metrics_.useful_bytes += plan.total_length();
        return t.delta();
    }

    /// Read-modify-write of every window holding plan bytes, serialized by
    /// the file's token, which is held across all windows.
    ClientMetrics access_sieving_write(const AccessPlan& plan, std::span<const std::byte> buffer,
                                       const SievingConfig& cfg = {}) {
        check_buffer(plan, buffer.size());
        Timed t(*this);
        if (!plan.empty()) {
            acquire_token();
            try {
                sieve(plan, cfg, [&](const Region& window, std::span<std::byte> sieve_buf, auto&& for_pieces) {
                    metrics_.logical_requests += 2;
                    contig_read(window.offset, sieve_buf);
                    for_pieces([&](const TransferPiece& p, std::uint64_t window_pos) {
                        std::memcpy(sieve_buf.data() + window_pos, buffer.data() + p.mem_offset, p.length);
                    });
                    contig_write(window.offset, sieve_buf);
                });
            } catch (...) {
                try {
                    release_token();
                } catch (...) {
                }
                throw;
            }
            release_token();
        }
        metrics_.useful_bytes += plan.total_length();
        return t.delta();
    }

    /// File regions batched at region_limit per logical request; each batch
    /// becomes READ_LIST/WRITE_LIST messages to the daemons it touches.
    ClientMetrics access_list(const AccessPlan& plan, const ListIoConfig& cfg, Direction dir,
                              std::span<std::byte> buffer) {
        check_buffer(plan, buffer.size());
        cfg.validate();
        Timed t(*this);
        if (dir == Direction::read)
            list_read(plan, buffer, cfg.region_limit);
        else
            list_write(plan, buffer, cfg.region_limit);
        return t.delta();
    }

    /// Returns the counters accumulated since the last snapshot and resets them.
    ClientMetrics metrics_snapshot() noexcept { return std::exchange(metrics_, ClientMetrics{}); }

    void acquire_token() {
        ++metrics_.server_messages;
        manager_call(wire::Opcode::token_acquire, handle(), owner_id_, {});
    }

    void release_token() {
        ++metrics_.server_messages;
        manager_call(wire::Opcode::token_release, handle(), owner_id_, {});
    }

private:
    using Clock = std::chrono::steady_clock;

    FileSession(Network& network, std::string manager_address)
        : network_(&network), manager_address_(std::move(manager_address)),
          owner_id_(detail::next_session_id()) {
        manager_ = network_->connect(manager_address_);
    }

    /// Measures the wall time of one strategy call and yields its metric delta.
    class Timed {
    public:
        explicit Timed(FileSession& s) : s_(s), before_(s.metrics_), t0_(Clock::now()) {}
        ClientMetrics delta() {
            s_.metrics_.elapsed += Clock::now() - t0_;
            t0_ = Clock::now();
            return s_.metrics_ - before_;
        }

    private:
        FileSession& s_;
        ClientMetrics before_;
        Clock::time_point t0_;
    };

    static void check_buffer(const AccessPlan& plan, std::size_t size) {
        if (plan.mem_span() > size)
            throw Error(ErrorCode::plan_invalid, "memory regions exceed the buffer");
    }

    wire::Response manager_call(wire::Opcode op, std::uint64_t handle, std::uint64_t offset,
                                std::span<const std::byte> body) {
        if (!manager_) throw Error(ErrorCode::invalid_argument, "session is closed");
        wire::RequestHeader h;
        h.opcode = op;
        h.request_id = ++request_id_;
        h.file_handle = handle;
        h.offset = offset;
        h.length = body.size();
        frame_.clear();
        wire::append_request(frame_, h, {});
        frame_.insert(frame_.end(), body.begin(), body.end());
        auto resp = manager_->call(frame_);
        wire::check_ok(resp, "manager");
        return resp;
    }

    Connection& daemon(std::uint32_t server) {
        if (daemons_.empty()) daemons_.resize(metadata_.roster.size());
        if (server >= daemons_.size()) throw Error(ErrorCode::protocol, "server index outside roster");
        auto& c = daemons_[server];
        if (!c) c = network_->connect(metadata_.roster[server]);
        return *c;
    }

    void send_data(std::uint32_t server, wire::Opcode op, std::uint64_t offset, std::uint64_t length,
                   std::span<const Region> trailing, std::span<const std::byte> payload) {
        wire::RequestHeader h;
        h.opcode = op;
        h.request_id = ++request_id_;
        h.file_handle = handle();
        h.offset = offset;
        h.length = length;
        h.region_count = static_cast<std::uint32_t>(trailing.size());
        frame_.clear();
        wire::append_request(frame_, h, trailing);
        frame_.insert(frame_.end(), payload.begin(), payload.end());
        daemon(server).send(frame_);
        ++metrics_.server_messages;
        metrics_.wire_bytes_written += payload.size();
    }

    wire::Response receive_data(std::uint32_t server, std::uint64_t expected_payload) {
        auto resp = daemon(server).receive();
        wire::check_ok(resp, "I/O daemon " + metadata_.roster[server]);
        if (resp.payload.size() != expected_payload)
            throw Error(ErrorCode::protocol, "unexpected response payload size");
        metrics_.wire_bytes_read += resp.payload.size();
        return resp;
    }

    struct ServerSpan {
        bool used = false;
        std::uint64_t local_begin = 0;
        std::uint64_t local_end = 0;
    };

    // A contiguous file range maps to one contiguous local range per server.
    std::vector<ServerSpan> server_spans(std::uint64_t offset, std::uint64_t length) const {
        std::vector<ServerSpan> spans(striping().pcount);
        for_each_stripe_chunk({offset, length}, striping(), [&](const StripeChunk& c) {
            auto& s = spans[c.server];
            if (!s.used) {
                s.used = true;
                s.local_begin = c.local_offset;
            }
            s.local_end = c.local_offset + c.length;
        });
        return spans;
    }

    void contig_read(std::uint64_t offset, std::span<std::byte> out) {
        const auto& sp = striping();
        if (offset % sp.ssize + out.size() <= sp.ssize) {
            const auto loc = stripe_location(offset, sp);
            send_data(loc.server, wire::Opcode::read, loc.local_offset, out.size(), {}, {});
            const auto resp = receive_data(loc.server, out.size());
            std::memcpy(out.data(), resp.payload.data(), out.size());
            return;
        }
        const auto spans = server_spans(offset, out.size());
        for (std::uint32_t s = 0; s < spans.size(); ++s)
            if (spans[s].used)
                send_data(s, wire::Opcode::read, spans[s].local_begin,
                          spans[s].local_end - spans[s].local_begin, {}, {});
        std::vector<wire::Response> responses(spans.size());
        for (std::uint32_t s = 0; s < spans.size(); ++s)
            if (spans[s].used) responses[s] = receive_data(s, spans[s].local_end - spans[s].local_begin);
        for_each_stripe_chunk({offset, out.size()}, sp, [&](const StripeChunk& c) {
            std::memcpy(out.data() + (c.file_offset - offset),
                        responses[c.server].payload.data() + (c.local_offset - spans[c.server].local_begin),
                        c.length);
        });
    }

    void contig_write(std::uint64_t offset, std::span<const std::byte> data) {
        const auto& sp = striping();
        if (offset % sp.ssize + data.size() <= sp.ssize) {
            const auto loc = stripe_location(offset, sp);
            send_data(loc.server, wire::Opcode::write, loc.local_offset, data.size(), {}, data);
            receive_data(loc.server, 0);
            return;
        }
        const auto spans = server_spans(offset, data.size());
        std::vector<std::vector<std::byte>> payloads(spans.size());
        for (std::uint32_t s = 0; s < spans.size(); ++s)
            if (spans[s].used) payloads[s].resize(spans[s].local_end - spans[s].local_begin);
        for_each_stripe_chunk({offset, data.size()}, sp, [&](const StripeChunk& c) {
            std::memcpy(payloads[c.server].data() + (c.local_offset - spans[c.server].local_begin),
                        data.data() + (c.file_offset - offset), c.length);
        });
        for (std::uint32_t s = 0; s < spans.size(); ++s)
            if (spans[s].used)
                send_data(s, wire::Opcode::write, spans[s].local_begin, payloads[s].size(), {}, payloads[s]);
        for (std::uint32_t s = 0; s < spans.size(); ++s)
            if (spans[s].used) receive_data(s, 0);
    }

    // Sieving driver: fn(window, sieve_buffer, for_pieces) runs once per
    // non-empty window; for_pieces(cb) calls cb(piece, position_in_window) for
    // the part of every transfer piece that falls inside the window.
    template <typename Fn>
    void sieve(const AccessPlan& plan, const SievingConfig& cfg, Fn&& fn) {
        if (plan.empty()) return;
        const auto windows = sieving_windows(plan.file(), cfg.buffer_size);
        const auto pieces = intersect_transfer_pieces(plan.mem(), plan.file());
        std::vector<std::byte> sieve_buf(std::min(cfg.buffer_size, extent(plan.file()).length));
        std::size_t first = 0;  // first piece not yet fully consumed
        for (const auto& w : windows) {
            auto buf = std::span(sieve_buf).first(w.length);
            fn(w, buf, [&](auto&& cb) {
                for (std::size_t i = first; i < pieces.size() && pieces[i].file_offset < w.end(); ++i) {
                    const auto& p = pieces[i];
                    const std::uint64_t lo = std::max(p.file_offset, w.offset);
                    const std::uint64_t hi = std::min(p.file_offset + p.length, w.end());
                    if (lo < hi)
                        cb(TransferPiece{p.mem_offset + (lo - p.file_offset), lo, hi - lo}, lo - w.offset);
                }
                while (first < pieces.size() && pieces[first].file_offset + pieces[first].length <= w.end())
                    ++first;
            });
        }
    }

    struct ListEntry {
        Region local;
        std::uint64_t stream_offset;  // position within the batch stream
    };

    struct ListMessage {
        std::uint32_t server;
        std::size_t first;
        std::size_t count;
        std::uint64_t bytes;
    };

    // Splits one batch per server and re-batches each server's sub-list.
    std::pair<std::vector<std::vector<ListEntry>>, std::vector<ListMessage>>
    plan_batch(std::span<const Region> batch, std::uint32_t limit) const {
        std::vector<std::vector<ListEntry>> per_server(striping().pcount);
        std::uint64_t pos = 0;
        for (const auto& r : batch) {
            for_each_stripe_chunk(r, striping(), [&](const StripeChunk& c) {
                per_server[c.server].push_back({{c.local_offset, c.length}, pos + (c.file_offset - r.offset)});
            });
            pos += r.length;
        }
        std::vector<ListMessage> messages;
        for (std::uint32_t s = 0; s < per_server.size(); ++s) {
            const auto& entries = per_server[s];
            for (std::size_t i = 0; i < entries.size(); i += limit) {
                const std::size_t n = std::min<std::size_t>(limit, entries.size() - i);
                std::uint64_t bytes = 0;
                for (std::size_t k = i; k < i + n; ++k) bytes += entries[k].local.length;
                messages.push_back({s, i, n, bytes});
            }
        }
        return {std::move(per_server), std::move(messages)};
    }

    static RegionList locals(const std::vector<ListEntry>& entries, const ListMessage& m) {
        RegionList out(m.count);
        for (std::size_t k = 0; k < m.count; ++k) out[k] = entries[m.first + k].local;
        return out;
    }

    void list_read(const AccessPlan& plan, std::span<std::byte> buffer, std::uint32_t limit) {
        detail::MemCursor cursor(plan.mem());
        std::vector<std::byte> stream;
        for (const auto& batch : batch_regions(plan.file(), limit)) {
            ++metrics_.logical_requests;
            const auto [per_server, messages] = plan_batch(batch, limit);
            for (const auto& m : messages)
                send_data(m.server, wire::Opcode::read_list, 0, m.bytes, locals(per_server[m.server], m), {});
            stream.resize(total_length(batch));
            for (const auto& m : messages) {
                const auto resp = receive_data(m.server, m.bytes);
                std::uint64_t pos = 0;
                for (std::size_t k = 0; k < m.count; ++k) {
                    const auto& e = per_server[m.server][m.first + k];
                    std::memcpy(stream.data() + e.stream_offset, resp.payload.data() + pos, e.local.length);
                    pos += e.local.length;
                }
            }
            cursor.scatter(stream, buffer);
        }
        metrics_.useful_bytes += plan.total_length();
    }

    void list_write(const AccessPlan& plan, std::span<const std::byte> buffer, std::uint32_t limit) {
        detail::MemCursor cursor(plan.mem());
        std::vector<std::byte> stream;
        std::vector<std::byte> payload;
        for (const auto& batch : batch_regions(plan.file(), limit)) {
            ++metrics_.logical_requests;
            stream.resize(total_length(batch));
            cursor.gather(stream, buffer);
            const auto [per_server, messages] = plan_batch(batch, limit);
            for (const auto& m : messages) {
                payload.clear();
                for (std::size_t k = 0; k < m.count; ++k) {
                    const auto& e = per_server[m.server][m.first + k];
                    const auto* src = stream.data() + e.stream_offset;
                    payload.insert(payload.end(), src, src + e.local.length);
                }
                send_data(m.server, wire::Opcode::write_list, 0, m.bytes, locals(per_server[m.server], m), payload);
            }
            for (const auto& m : messages) receive_data(m.server, 0);
        }
        metrics_.useful_bytes += plan.total_length();
    }

    Network* network_;
    std::string manager_address_;
    std::uint64_t owner_id_;
    std::unique_ptr<Connection> manager_;
    std::vector<std::unique_ptr<Connection>> daemons_;
    wire::FileMetadata metadata_;
    std::uint64_t request_id_ = 0;
    std::vector<std::byte> frame_;
    ClientMetrics metrics_;
};

}  // namespace listio
