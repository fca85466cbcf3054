#pragma once

// Message transport. A Connection carries encoded request frames to one
// endpoint and returns decoded responses in order. Two flavours exist:
// in-process (the frame is decoded and dispatched to the handler directly)
// and TCP (a reliable byte stream on a real socket).

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "listio/error.hpp"
#include "listio/wire.hpp"

namespace listio {

inline constexpr std::string_view kInprocScheme = "inproc:";

struct Reply {
    wire::Status status = wire::Status::ok;
    std::vector<std::byte> payload;
};

/// A protocol endpoint: the manager or an I/O daemon.
class RequestHandler {
public:
    virtual ~RequestHandler() = default;
    virtual Reply handle(const wire::DecodedRequest& request) = 0;
    /// Wakes any request blocked inside handle(); later calls may fail.
    virtual void shutdown() {}
};

/// Runs the handler and folds any thrown Error into a status reply.
inline wire::Response dispatch(RequestHandler& handler, const wire::DecodedRequest& req) {
    wire::Response resp;
    resp.request_id = req.header.request_id;
    try {
        Reply r = handler.handle(req);
        resp.status = r.status;
        resp.payload = std::move(r.payload);
    } catch (const Error& e) {
        resp.status = wire::to_status(e.code());
        resp.payload = wire::text_bytes(e.what());
    } catch (const std::exception& e) {
        resp.status = wire::Status::io_error;
        resp.payload = wire::text_bytes(e.what());
    }
    return resp;
}

class Connection {
public:
    virtual ~Connection() = default;
    virtual void send(std::span<const std::byte> frame) = 0;
    virtual wire::Response receive() = 0;

    wire::Response call(std::span<const std::byte> frame) {
        send(frame);
        return receive();
    }
};

// ---------------------------------------------------------------------------
// In-process

class InprocConnection final : public Connection {
public:
    explicit InprocConnection(RequestHandler& handler) : handler_(handler) {}

    void send(std::span<const std::byte> frame) override {
        const auto req = wire::decode_request(frame);
        pending_.push_back(wire::encode_response(dispatch(handler_, req)));
    }

    wire::Response receive() override {
        if (pending_.empty()) throw Error(ErrorCode::protocol, "receive without pending request");
        auto bytes = std::move(pending_.front());
        pending_.pop_front();
        return wire::decode_response(bytes);
    }

private:
    RequestHandler& handler_;
    std::deque<std::vector<std::byte>> pending_;
};

// ---------------------------------------------------------------------------
// Sockets

class UniqueFd {
public:
    UniqueFd() = default;
    explicit UniqueFd(int fd) : fd_(fd) {}
    UniqueFd(UniqueFd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    UniqueFd& operator=(UniqueFd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    UniqueFd(const UniqueFd&) = delete;
    UniqueFd& operator=(const UniqueFd&) = delete;
    ~UniqueFd() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    void reset() noexcept {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

/// Returns false on orderly EOF before any byte; throws on partial frames.
inline bool read_exact(int fd, std::byte* out, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r == 0) {
            if (got == 0) return false;
            throw Error(ErrorCode::protocol, "connection closed mid-message");
        }
        if (r < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io, errno_text("recv"));
        }
        got += static_cast<std::size_t>(r);
    }
    return true;
}

inline void write_all(int fd, std::span<const std::byte> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t r = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io, errno_text("send"));
        }
        sent += static_cast<std::size_t>(r);
    }
}

inline void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

inline std::pair<std::string, std::string> split_host_port(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 == address.size())
        throw Error(ErrorCode::invalid_argument, "address must be HOST:PORT: " + address);
    return {address.substr(0, colon), address.substr(colon + 1)};
}

struct AddrInfoDeleter {
    void operator()(addrinfo* p) const noexcept { ::freeaddrinfo(p); }
};

inline std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& address, bool passive) {
    auto [host, port] = split_host_port(address);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw Error(ErrorCode::invalid_argument, "cannot resolve " + address + ": " + gai_strerror(rc));
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(res);
}

class TcpConnection final : public Connection {
public:
    explicit TcpConnection(const std::string& address) {
        auto ai = resolve(address, false);
        fd_ = UniqueFd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!fd_) throw Error(ErrorCode::io, errno_text("socket"));
        if (::connect(fd_.get(), ai->ai_addr, ai->ai_addrlen) != 0)
            throw Error(ErrorCode::io, errno_text(("connect " + address).c_str()));
        set_nodelay(fd_.get());
    }

    void send(std::span<const std::byte> frame) override { write_all(fd_.get(), frame); }

    wire::Response receive() override {
        std::array<std::byte, wire::kResponsePrefixSize> prefix;
        if (!read_exact(fd_.get(), prefix.data(), prefix.size()))
            throw Error(ErrorCode::io, "connection closed by peer");
        const auto p = wire::decode_response_prefix(prefix);
        wire::Response r{p.request_id, p.status, std::vector<std::byte>(p.payload_length)};
        if (p.payload_length > 0 && !read_exact(fd_.get(), r.payload.data(), r.payload.size()))
            throw Error(ErrorCode::protocol, "connection closed before response payload");
        return r;
    }

private:
    UniqueFd fd_;
};

/// Thread-per-connection TCP front end for a RequestHandler.
class TcpServer {
public:
    /// Binds immediately; port 0 picks an ephemeral port.
    TcpServer(RequestHandler& handler, const std::string& address) : handler_(handler) {
        auto ai = resolve(address, true);
        listen_fd_ = UniqueFd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!listen_fd_) throw Error(ErrorCode::io, errno_text("socket"));
        int one = 1;
        ::setsockopt(listen_fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(listen_fd_.get(), ai->ai_addr, ai->ai_addrlen) != 0)
            throw Error(ErrorCode::io, errno_text(("bind " + address).c_str()));
        if (::listen(listen_fd_.get(), 128) != 0) throw Error(ErrorCode::io, errno_text("listen"));
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(listen_fd_.get(), reinterpret_cast<sockaddr*>(&bound), &len);
        const auto host = split_host_port(address).first;
        address_ = (host.empty() || host == "0.0.0.0" ? std::string("127.0.0.1") : host) + ":" +
                   std::to_string(ntohs(bound.sin_port));
        acceptor_ = std::thread([this] { accept_loop(); });
    }

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;
    ~TcpServer() { stop(); }

    const std::string& address() const noexcept { return address_; }

    void stop() {
        if (stopping_.exchange(true)) return;
        handler_.shutdown();
        ::shutdown(listen_fd_.get(), SHUT_RDWR);
        if (acceptor_.joinable()) acceptor_.join();
        std::list<Session> sessions;
        {
            std::lock_guard lock(mu_);
            for (auto& s : sessions_)
                if (s.fd >= 0) ::shutdown(s.fd, SHUT_RDWR);
            sessions.swap(sessions_);
        }
        for (auto& s : sessions) s.thread.join();
    }

private:
    struct Session {
        int fd = -1;
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };

    void accept_loop() {
        while (!stopping_) {
            const int fd = ::accept(listen_fd_.get(), nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR || errno == ECONNABORTED) continue;
                return;
            }
            set_nodelay(fd);
            std::lock_guard lock(mu_);
            reap_locked();
            if (stopping_) {
                ::close(fd);
                return;
            }
            auto done = std::make_shared<std::atomic<bool>>(false);
            sessions_.push_back({fd, std::thread([this, fd, done] {
                                     serve(fd);
                                     done->store(true);
                                 }),
                                 done});
        }
    }

    void reap_locked() {
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (it->done->load()) {
                it->thread.join();
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void serve(int fd) {
        try {
            serve_loop(fd);
        } catch (const std::exception&) {
            // Peer went away or sent garbage; the connection is dropped.
        }
        std::lock_guard lock(mu_);
        for (auto& s : sessions_)
            if (s.fd == fd) s.fd = -1;
        ::close(fd);
    }

    void serve_loop(int fd) {
        std::vector<std::byte> frame;
        std::vector<std::byte> out;
        for (;;) {
            frame.resize(wire::kHeaderSize);
            if (!read_exact(fd, frame.data(), wire::kHeaderSize)) return;
            wire::RequestHeader header;
            try {
                header = wire::decode_request_header(frame);
            } catch (const Error& e) {
                // Malformed prefix: reject without reading further and drop the stream.
                out.clear();
                auto msg = wire::text_bytes(e.what());
                wire::append_response_prefix(out, {0, wire::Status::protocol_error, msg.size()});
                out.insert(out.end(), msg.begin(), msg.end());
                write_all(fd, out);
                return;
            }
            const std::size_t rest =
                wire::kRegionEntrySize * header.region_count + wire::payload_size(header);
            frame.resize(wire::kHeaderSize + rest);
            if (rest > 0 && !read_exact(fd, frame.data() + wire::kHeaderSize, rest)) return;
            const auto resp = dispatch(handler_, wire::decode_request(frame));
            out.clear();
            wire::append_response_prefix(out, {resp.request_id, resp.status, resp.payload.size()});
            out.insert(out.end(), resp.payload.begin(), resp.payload.end());
            write_all(fd, out);
        }
    }

    RequestHandler& handler_;
    UniqueFd listen_fd_;
    std::string address_;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};
    std::mutex mu_;
    std::list<Session> sessions_;
};

// ---------------------------------------------------------------------------

/// Resolves endpoint addresses to connections. "inproc:NAME" addresses go to
/// handlers bound in this process; anything else is treated as HOST:PORT.
class Network {
public:
    void bind_inproc(const std::string& address, RequestHandler& handler) {
        std::lock_guard lock(mu_);
        if (!inproc_.emplace(address, &handler).second)
            throw Error(ErrorCode::exists, "address already bound: " + address);
    }

    void unbind_inproc(const std::string& address) {
        std::lock_guard lock(mu_);
        inproc_.erase(address);
    }

    std::unique_ptr<Connection> connect(const std::string& address) {
        if (address.starts_with(kInprocScheme)) {
            std::lock_guard lock(mu_);
            auto it = inproc_.find(address);
            if (it == inproc_.end()) throw Error(ErrorCode::not_found, "no endpoint at " + address);
            return std::make_unique<InprocConnection>(*it->second);
        }
        return std::make_unique<TcpConnection>(address);
    }

private:
    std::mutex mu_;
    std::map<std::string, RequestHandler*> inproc_;
};

}  // namespace listio
