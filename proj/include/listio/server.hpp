#pragma once

// The two daemon roles. The manager owns metadata (names, handles, striping,
// server roster) and the per-file write token; it never touches file data.
// I/O daemons store each file's stripe units in one local backing file and
// serve contiguous and list reads/writes against it.

#include <fcntl.h>
#include <sys/stat.h>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "listio/error.hpp"
#include "listio/region.hpp"
#include "listio/transport.hpp"
#include "listio/wire.hpp"

namespace listio {

// ---------------------------------------------------------------------------
// Stripe storage

/// Local backing files, one per handle: `<root>/<handle>.stripe`.
/// Unwritten bytes read as zero. Each call is atomic with respect to other
/// calls on the same handle.
class StripeStore {
public:
    explicit StripeStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
        for (const auto& entry : std::filesystem::directory_iterator(root_)) {
            if (entry.path().extension() != ".stripe") continue;
            try {
                const auto handle = std::stoull(entry.path().stem().string());
                open_entry(handle, false);
            } catch (const std::logic_error&) {
            }
        }
    }

    static std::filesystem::path stripe_path(const std::filesystem::path& root, std::uint64_t handle) {
        return root / (std::to_string(handle) + ".stripe");
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Registers a handle with an empty backing file (truncating any old one).
    void create(std::uint64_t handle) {
        std::lock_guard lock(mu_);
        auto it = entries_.find(handle);
        if (it != entries_.end()) {
            std::unique_lock elock(it->second->mu);
            if (::ftruncate(it->second->fd.get(), 0) != 0) throw Error(ErrorCode::io, errno_text("ftruncate"));
            return;
        }
        open_entry_locked(handle, true);
    }

    bool contains(std::uint64_t handle) const {
        std::lock_guard lock(mu_);
        return entries_.contains(handle);
    }

    void read(std::uint64_t handle, std::uint64_t offset, std::span<std::byte> out) const {
        auto& e = entry(handle);
        std::shared_lock lock(e.mu);
        pread_zero_fill(e.fd.get(), offset, out);
    }

    void write(std::uint64_t handle, std::uint64_t offset, std::span<const std::byte> data) {
        auto& e = entry(handle);
        std::unique_lock lock(e.mu);
        pwrite_all(e.fd.get(), offset, data);
    }

    /// Concatenation of the listed spans, in list order.
    void read_list(std::uint64_t handle, std::span<const Region> regions, std::span<std::byte> out) const {
        if (out.size() != total_length(regions))
            throw Error(ErrorCode::protocol, "list read buffer size mismatch");
        auto& e = entry(handle);
        std::shared_lock lock(e.mu);
        std::size_t pos = 0;
        for (const auto& r : regions) {
            pread_zero_fill(e.fd.get(), r.offset, out.subspan(pos, r.length));
            pos += r.length;
        }
    }

    void write_list(std::uint64_t handle, std::span<const Region> regions, std::span<const std::byte> data) {
        if (data.size() != total_length(regions))
            throw Error(ErrorCode::protocol, "list write payload does not match region lengths");
        auto& e = entry(handle);
        std::unique_lock lock(e.mu);
        std::size_t pos = 0;
        for (const auto& r : regions) {
            pwrite_all(e.fd.get(), r.offset, data.subspan(pos, r.length));
            pos += r.length;
        }
    }

    std::uint64_t local_size(std::uint64_t handle) const {
        auto& e = entry(handle);
        std::shared_lock lock(e.mu);
        struct stat st {};
        if (::fstat(e.fd.get(), &st) != 0) throw Error(ErrorCode::io, errno_text("fstat"));
        return static_cast<std::uint64_t>(st.st_size);
    }

private:
    struct Entry {
        UniqueFd fd;
        mutable std::shared_mutex mu;
    };

    Entry& entry(std::uint64_t handle) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find(handle);
        if (it == entries_.end())
            throw Error(ErrorCode::not_found, "unknown handle " + std::to_string(handle));
        return *it->second;
    }

    void open_entry(std::uint64_t handle, bool truncate) {
        std::lock_guard lock(mu_);
        open_entry_locked(handle, truncate);
    }

    void open_entry_locked(std::uint64_t handle, bool truncate) {
        const auto path = stripe_path(root_, handle);
        int flags = O_RDWR | O_CREAT | O_CLOEXEC;
        if (truncate) flags |= O_TRUNC;
        UniqueFd fd(::open(path.c_str(), flags, 0644));
        if (!fd) throw Error(ErrorCode::io, errno_text(("open " + path.string()).c_str()));
        auto e = std::make_unique<Entry>();
        e->fd = std::move(fd);
        entries_[handle] = std::move(e);
    }

    static void pread_zero_fill(int fd, std::uint64_t offset, std::span<std::byte> out) {
        std::size_t got = 0;
        while (got < out.size()) {
            const ssize_t r = ::pread(fd, out.data() + got, out.size() - got,
                                      static_cast<off_t>(offset + got));
            if (r < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::io, errno_text("pread"));
            }
            if (r == 0) break;
            got += static_cast<std::size_t>(r);
        }
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(got), out.end(), std::byte{0});
    }

    static void pwrite_all(int fd, std::uint64_t offset, std::span<const std::byte> data) {
        std::size_t done = 0;
        while (done < data.size()) {
            const ssize_t r = ::pwrite(fd, data.data() + done, data.size() - done,
                                       static_cast<off_t>(offset + done));
            if (r < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::io, errno_text("pwrite"));
            }
            done += static_cast<std::size_t>(r);
        }
    }

    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::map<std::uint64_t, std::unique_ptr<Entry>> entries_;
};

// ---------------------------------------------------------------------------
// I/O daemon

class IoDaemon final : public RequestHandler {
public:
    explicit IoDaemon(std::filesystem::path storage_root) : store_(std::move(storage_root)) {}

    StripeStore& store() noexcept { return store_; }

    Reply handle(const wire::DecodedRequest& req) override {
        using wire::Opcode;
        const auto& h = req.header;
        switch (h.opcode) {
            case Opcode::create:
                store_.create(h.file_handle);
                return {};
            case Opcode::close:
                return {};
            case Opcode::read: {
                if (h.length > wire::kMaxPayload) throw Error(ErrorCode::protocol, "read too large");
                Reply r{wire::Status::ok, std::vector<std::byte>(h.length)};
                store_.read(h.file_handle, h.offset, r.payload);
                return r;
            }
            case Opcode::write:
                store_.write(h.file_handle, h.offset, req.payload);
                return {};
            case Opcode::read_list: {
                const auto& regions = *req.trailing;
                check_regions(regions, "read_list");
                const auto total = total_length(regions);
                if (total != h.length) throw Error(ErrorCode::protocol, "list read length mismatch");
                if (total > wire::kMaxPayload) throw Error(ErrorCode::protocol, "list read too large");
                Reply r{wire::Status::ok, std::vector<std::byte>(total)};
                store_.read_list(h.file_handle, regions, r.payload);
                return r;
            }
            case Opcode::write_list: {
                const auto& regions = *req.trailing;
                check_regions(regions, "write_list");
                store_.write_list(h.file_handle, regions, req.payload);
                return {};
            }
            case Opcode::stat:
                return {wire::Status::ok, wire::encode_u64(store_.local_size(h.file_handle))};
            default:
                throw Error(ErrorCode::protocol, "opcode not served by an I/O daemon");
        }
    }

private:
    StripeStore store_;
};

// ---------------------------------------------------------------------------
// Manager

class Manager final : public RequestHandler {
public:
    /// `network` is used to reach daemons for create and size queries.
    explicit Manager(Network& network) : network_(network) {}

    Reply handle(const wire::DecodedRequest& req) override {
        using wire::Opcode;
        const auto& h = req.header;
        switch (h.opcode) {
            case Opcode::register_server:
                return {wire::Status::ok, wire::encode_u64(register_server(wire::bytes_text(req.payload)))};
            case Opcode::create: {
                auto [name, sp] = wire::decode_create_body(req.payload);
                return {wire::Status::ok, wire::encode_metadata(create(name, sp))};
            }
            case Opcode::open:
                return {wire::Status::ok, wire::encode_metadata(open(wire::bytes_text(req.payload)))};
            case Opcode::stat:
                return {wire::Status::ok, wire::encode_metadata(stat(h.file_handle))};
            case Opcode::close:
                lookup(h.file_handle);
                return {};
            case Opcode::token_acquire:
                acquire_token(h.file_handle, h.offset);
                return {};
            case Opcode::token_release:
                release_token(h.file_handle, h.offset);
                return {};
            default:
                throw Error(ErrorCode::protocol, "the manager does not serve file data");
        }
    }

    void shutdown() override {
        std::lock_guard lock(mu_);
        stopping_ = true;
        token_cv_.notify_all();
    }

    std::uint64_t register_server(const std::string& address) {
        std::lock_guard lock(mu_);
        servers_.push_back(address);
        return servers_.size() - 1;
    }

    std::vector<std::string> servers() const {
        std::lock_guard lock(mu_);
        return servers_;
    }

    /// pcount 0 selects every registered server.
    wire::FileMetadata create(const std::string& name, StripingParams sp) {
        std::lock_guard create_lock(create_mu_);
        wire::FileMetadata m;
        {
            std::lock_guard lock(mu_);
            if (name.empty()) throw Error(ErrorCode::invalid_argument, "empty file name");
            if (files_.contains(name)) throw Error(ErrorCode::exists, "file exists: " + name);
            if (sp.pcount == 0) sp.pcount = static_cast<std::uint32_t>(servers_.size());
            if (sp.pcount == 0) throw Error(ErrorCode::invalid_argument, "no I/O daemons registered");
            sp.validate();
            if (sp.pcount > servers_.size())
                throw Error(ErrorCode::invalid_argument,
                            "pcount " + std::to_string(sp.pcount) + " exceeds registered daemons");
            m.handle = next_handle_++;
            m.name = name;
            m.striping = sp;
            m.roster.assign(servers_.begin(), servers_.begin() + sp.pcount);
        }
        for (const auto& address : m.roster) {
            auto conn = network_.connect(address);
            wire::RequestHeader h;
            h.opcode = wire::Opcode::create;
            h.file_handle = m.handle;
            wire::check_ok(conn->call(wire::encode_request(h)), "create on " + address);
        }
        std::lock_guard lock(mu_);
        handles_[m.handle] = name;
        files_[name] = m;
        tokens_[m.handle];
        return m;
    }

    wire::FileMetadata open(const std::string& name) {
        wire::FileMetadata m;
        {
            std::lock_guard lock(mu_);
            auto it = files_.find(name);
            if (it == files_.end()) throw Error(ErrorCode::not_found, "no such file: " + name);
            m = it->second;
        }
        m.size = query_size(m);
        return m;
    }

    wire::FileMetadata stat(std::uint64_t handle) {
        auto m = lookup(handle);
        m.size = query_size(m);
        return m;
    }

    /// Blocks until `owner` holds the token for `handle`. Grants are FIFO.
    void acquire_token(std::uint64_t handle, std::uint64_t owner) {
        std::unique_lock lock(mu_);
        auto it = tokens_.find(handle);
        if (it == tokens_.end()) throw Error(ErrorCode::not_found, "unknown handle " + std::to_string(handle));
        auto& queue = it->second;
        if (std::find(queue.begin(), queue.end(), owner) != queue.end())
            throw Error(ErrorCode::protocol, "owner already holds or awaits this token");
        queue.push_back(owner);
        token_cv_.wait(lock, [&] { return stopping_ || queue.front() == owner; });
        if (queue.front() != owner) {
            queue.erase(std::find(queue.begin(), queue.end(), owner));
            throw Error(ErrorCode::io, "manager shutting down");
        }
    }

    void release_token(std::uint64_t handle, std::uint64_t owner) {
        std::lock_guard lock(mu_);
        auto it = tokens_.find(handle);
        if (it == tokens_.end()) throw Error(ErrorCode::not_found, "unknown handle " + std::to_string(handle));
        auto& queue = it->second;
        if (queue.empty() || queue.front() != owner)
            throw Error(ErrorCode::protocol, "token released by a non-holder");
        queue.pop_front();
        token_cv_.notify_all();
    }

    /// Holder plus waiters.
    std::size_t token_queue_length(std::uint64_t handle) const {
        std::lock_guard lock(mu_);
        auto it = tokens_.find(handle);
        return it == tokens_.end() ? 0 : it->second.size();
    }

private:
    wire::FileMetadata lookup(std::uint64_t handle) const {
        std::lock_guard lock(mu_);
        auto it = handles_.find(handle);
        if (it == handles_.end()) throw Error(ErrorCode::not_found, "unknown handle " + std::to_string(handle));
        return files_.at(it->second);
    }

    std::uint64_t query_size(const wire::FileMetadata& m) {
        std::uint64_t size = 0;
        for (std::uint32_t i = 0; i < m.roster.size(); ++i) {
            auto conn = network_.connect(m.roster[i]);
            wire::RequestHeader h;
            h.opcode = wire::Opcode::stat;
            h.file_handle = m.handle;
            const auto resp = conn->call(wire::encode_request(h));
            wire::check_ok(resp, "stat on " + m.roster[i]);
            size = std::max(size, global_end_for_local_size(i, wire::decode_u64(resp.payload), m.striping));
        }
        return size;
    }

    Network& network_;
    std::mutex create_mu_;
    mutable std::mutex mu_;
    std::condition_variable token_cv_;
    bool stopping_ = false;
    std::vector<std::string> servers_;
    std::map<std::string, wire::FileMetadata> files_;
    std::map<std::uint64_t, std::string> handles_;
    std::map<std::uint64_t, std::deque<std::uint64_t>> tokens_;
    std::uint64_t next_handle_ = 1;
};

/// Announces an I/O daemon to the manager; returns its roster index.
inline std::uint64_t register_with_manager(Network& network, const std::string& manager_address,
                                           const std::string& own_address) {
    auto conn = network.connect(manager_address);
    const auto body = wire::text_bytes(own_address);
    wire::RequestHeader h;
    h.opcode = wire::Opcode::register_server;
    h.length = body.size();
    auto frame = wire::encode_request(h);
    frame.insert(frame.end(), body.begin(), body.end());
    const auto resp = conn->call(frame);
    wire::check_ok(resp, "register with " + manager_address);
    return wire::decode_u64(resp.payload);
}

}  // namespace listio
