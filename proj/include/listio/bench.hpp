#pragma once

// Benchmark harness: cluster lifecycle, the (workload x strategy x clients x
// accesses) matrix runner, byte-exact verification against the oracle, and
// CSV reporting.

#include <barrier>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <latch>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "listio/client.hpp"
#include "listio/region.hpp"
#include "listio/server.hpp"
#include "listio/transport.hpp"
#include "listio/workloads.hpp"

namespace listio::bench {

// ---------------------------------------------------------------------------
// Cluster

enum class TransportKind { inproc, tcp };

struct ClusterOptions {
    std::uint32_t servers = 8;
    TransportKind transport = TransportKind::inproc;
    std::filesystem::path storage_root;  // empty: fresh temporary directory, removed on shutdown
    std::string host = "127.0.0.1";
    std::uint16_t manager_port = 0;  // tcp only; 0 picks an ephemeral port
};

/// Where a benchmark sends its requests. `storage_for` maps a daemon address
/// to its storage root when the harness can see it (local clusters only).
struct Target {
    Network* network = nullptr;
    std::string manager_address;
    std::function<std::optional<std::filesystem::path>(const std::string&)> storage_for;
};

/// One manager plus N I/O daemons in this process. The manager shares the
/// node with daemon 0, as in a setup where one I/O node doubles as manager.
class Cluster {
public:
    static std::unique_ptr<Cluster> launch(const ClusterOptions& opts) {
        return std::unique_ptr<Cluster>(new Cluster(opts));
    }

    Cluster(const Cluster&) = delete;
    Cluster& operator=(const Cluster&) = delete;

    ~Cluster() {
        for (auto& s : tcp_servers_) s->stop();
        tcp_servers_.clear();
        for (const auto& a : inproc_addresses_) network_.unbind_inproc(a);
        if (owns_root_) {
            std::error_code ec;
            std::filesystem::remove_all(root_, ec);
        }
    }

    Network& network() noexcept { return network_; }
    Manager& manager() noexcept { return *manager_; }
    const std::string& manager_address() const noexcept { return manager_address_; }
    const std::vector<std::string>& roster() const noexcept { return roster_; }
    IoDaemon& daemon(std::size_t i) { return *daemons_.at(i); }
    std::size_t size() const noexcept { return daemons_.size(); }
    const std::filesystem::path& storage_root() const noexcept { return root_; }

    std::optional<std::filesystem::path> storage_for(const std::string& address) const {
        for (std::size_t i = 0; i < roster_.size(); ++i)
            if (roster_[i] == address) return daemons_[i]->store().root();
        return std::nullopt;
    }

    Target target() {
        return {&network_, manager_address_,
                [this](const std::string& a) { return storage_for(a); }};
    }

private:
    explicit Cluster(const ClusterOptions& opts) {
        if (opts.servers == 0) throw Error(ErrorCode::invalid_argument, "cluster needs at least one daemon");
        root_ = opts.storage_root;
        if (root_.empty()) {
            std::random_device rd;
            root_ = std::filesystem::temp_directory_path() /
                    ("listio-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
            owns_root_ = true;
        }
        std::filesystem::create_directories(root_);
        manager_ = std::make_unique<Manager>(network_);
        if (opts.transport == TransportKind::tcp) {
            tcp_servers_.push_back(std::make_unique<TcpServer>(
                *manager_, opts.host + ":" + std::to_string(opts.manager_port)));
            manager_address_ = tcp_servers_.back()->address();
        } else {
            manager_address_ = std::string(kInprocScheme) + "manager";
            bind(manager_address_, *manager_);
        }
        for (std::uint32_t i = 0; i < opts.servers; ++i) {
            daemons_.push_back(std::make_unique<IoDaemon>(root_ / ("iod" + std::to_string(i))));
            std::string address;
            if (opts.transport == TransportKind::tcp) {
                tcp_servers_.push_back(std::make_unique<TcpServer>(*daemons_.back(), opts.host + ":0"));
                address = tcp_servers_.back()->address();
            } else {
                address = std::string(kInprocScheme) + "iod" + std::to_string(i);
                bind(address, *daemons_.back());
            }
            register_with_manager(network_, manager_address_, address);
            roster_.push_back(address);
        }
    }

    void bind(const std::string& address, RequestHandler& h) {
        network_.bind_inproc(address, h);
        inproc_addresses_.push_back(address);
    }

    Network network_;
    std::filesystem::path root_;
    bool owns_root_ = false;
    std::unique_ptr<Manager> manager_;
    std::vector<std::unique_ptr<IoDaemon>> daemons_;
    std::vector<std::unique_ptr<TcpServer>> tcp_servers_;
    std::vector<std::string> inproc_addresses_;
    std::string manager_address_;
    std::vector<std::string> roster_;
};

// ---------------------------------------------------------------------------
// Verification

struct VerifyResult {
    bool ok = true;
    std::uint64_t offset = 0;  // file offset of the first divergence
    std::uint8_t expected = 0;
    std::uint8_t actual = 0;
    std::string detail;

    static VerifyResult pass() { return {}; }
};

inline std::optional<std::size_t> first_divergence(std::span<const std::byte> a, std::span<const std::byte> b) {
    const std::size_t n = std::min(a.size(), b.size());
    const auto mm = std::mismatch(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n), b.begin());
    if (mm.first != a.begin() + static_cast<std::ptrdiff_t>(n))
        return static_cast<std::size_t>(mm.first - a.begin());
    if (a.size() != b.size()) return n;
    return std::nullopt;
}

/// Checks that a read filled the plan's memory regions with the image's bytes.
inline VerifyResult verify_read(const AccessPlan& plan, std::span<const std::byte> image,
                                std::span<const std::byte> buffer) {
    const auto expected = workloads::extract_file_stream(image, plan);
    const auto actual = workloads::gather_memory_stream(buffer, plan);
    const auto at = first_divergence(expected, actual);
    if (!at) return VerifyResult::pass();
    std::uint64_t pos = *at;
    std::uint64_t file_offset = 0;
    for (const auto& r : plan.file()) {
        if (pos < r.length) {
            file_offset = r.offset + pos;
            break;
        }
        pos -= r.length;
    }
    VerifyResult v{false, file_offset, std::to_integer<std::uint8_t>(expected[*at]),
                   std::to_integer<std::uint8_t>(actual[*at]), {}};
    v.detail = "read mismatch at file offset " + std::to_string(file_offset);
    return v;
}

inline VerifyResult verify_write(std::span<const std::byte> expected, std::span<const std::byte> actual) {
    const auto at = first_divergence(expected, actual);
    if (!at) return VerifyResult::pass();
    VerifyResult v;
    v.ok = false;
    v.offset = *at;
    v.expected = *at < expected.size() ? std::to_integer<std::uint8_t>(expected[*at]) : 0;
    v.actual = *at < actual.size() ? std::to_integer<std::uint8_t>(actual[*at]) : 0;
    v.detail = *at >= std::min(expected.size(), actual.size())
                   ? "file length " + std::to_string(actual.size()) + " != expected " + std::to_string(expected.size())
                   : "write mismatch at file offset " + std::to_string(*at);
    return v;
}

/// Rebuilds the logical file from per-server stripe files by mapping every
/// local stripe unit back through the inverse striping function.
inline std::vector<std::byte> reassemble_from_stripes(std::span<const std::filesystem::path> stripe_files,
                                                      const StripingParams& sp, std::uint64_t size) {
    std::vector<std::byte> out(size, std::byte{0});
    for (std::uint32_t s = 0; s < stripe_files.size(); ++s) {
        std::ifstream in(stripe_files[s], std::ios::binary);
        if (!in) continue;  // never written: all holes
        std::vector<char> local((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        for (std::uint64_t local_off = 0; local_off < local.size(); local_off += sp.ssize) {
            const std::uint64_t g = global_offset(s, local_off, sp);
            if (g >= size) continue;
            const std::uint64_t n = std::min<std::uint64_t>({sp.ssize, local.size() - local_off, size - g});
            std::memcpy(out.data() + g, local.data() + local_off, n);
        }
    }
    return out;
}

/// Final file contents, via the daemons' storage when visible, else via reads.
inline std::vector<std::byte> read_back_file(const Target& target, FileSession& session, std::uint64_t size) {
    const auto& md = session.metadata();
    std::vector<std::filesystem::path> files;
    if (target.storage_for) {
        for (const auto& a : md.roster) {
            auto root = target.storage_for(a);
            if (!root) break;
            files.push_back(StripeStore::stripe_path(*root, md.handle));
        }
    }
    if (files.size() == md.roster.size()) return reassemble_from_stripes(files, md.striping, size);
    std::vector<std::byte> out(size);
    session.read(0, out);
    session.metrics_snapshot();
    return out;
}

// ---------------------------------------------------------------------------
// Configuration and reports

enum class Strategy { multiple, sieving, list };

inline const char* to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::multiple: return "multiple";
        case Strategy::sieving: return "sieving";
        case Strategy::list: return "list";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "multiple") return Strategy::multiple;
    if (s == "sieving") return Strategy::sieving;
    if (s == "list") return Strategy::list;
    throw Error(ErrorCode::invalid_argument, "unknown strategy: " + s);
}

/// Direction each workload runs in unless overridden.
inline Direction default_direction(workloads::Kind k) noexcept {
    return k == workloads::Kind::flash ? Direction::write : Direction::read;
}

struct BenchConfig {
    workloads::Workload workload;  // clients/accesses overridden per cell
    Direction direction = Direction::read;
    std::vector<Strategy> strategies{Strategy::list};
    std::vector<std::uint32_t> clients{8};
    std::vector<std::uint64_t> accesses{64};
    std::uint32_t servers = 8;  // pcount of each benchmark file
    std::uint64_t ssize = kDefaultStripeSize;
    SievingConfig sieving;
    ListIoConfig list;
    std::uint32_t repetitions = 3;
    bool verify = false;
    bool allow_sieving_writes = false;
    std::uint64_t seed = 1;

    void validate() const {
        if (repetitions == 0) throw Error(ErrorCode::invalid_argument, "repetitions must be >= 1");
        list.validate();
        if (sieving.buffer_size == 0) throw Error(ErrorCode::invalid_argument, "sieving buffer must be >= 1");
        if (direction == Direction::write && workload.kind == workloads::Kind::tiled)
            throw Error(ErrorCode::invalid_argument, "tiled plans overlap; the tiled workload is read-only");
        for (auto s : strategies)
            if (s == Strategy::sieving && direction == Direction::write && !allow_sieving_writes)
                throw Error(ErrorCode::invalid_argument,
                            "sieving writes are excluded by default; enable them explicitly");
    }
};

enum class Verified { skipped, pass, fail };

inline const char* to_string(Verified v) noexcept {
    switch (v) {
        case Verified::skipped: return "skip";
        case Verified::pass: return "pass";
        case Verified::fail: return "fail";
    }
    return "?";
}

struct BenchRow {
    std::string workload;
    Strategy strategy = Strategy::list;
    std::uint32_t clients = 0;
    std::uint64_t accesses = 0;
    std::optional<std::uint32_t> rep;  // empty for the mean row
    ClientMetrics totals;              // summed over clients
    std::vector<std::uint64_t> per_client_logical;
    double useful_fraction = 0;
    double elapsed_us = 0;
    Verified verified = Verified::skipped;
    std::string error;  // first verification divergence or client failure
};

struct BenchReport {
    std::vector<BenchRow> rows;

    bool all_verified() const {
        for (const auto& r : rows)
            if (r.verified == Verified::fail || !r.error.empty()) return false;
        return true;
    }
};

inline constexpr std::string_view kCsvHeader =
    "workload,strategy,clients,accesses,rep,logical_requests,server_messages,wire_bytes_read,"
    "wire_bytes_written,useful_bytes,useful_fraction,elapsed_us,verified";

inline std::string format_row(const BenchRow& r) {
    std::ostringstream os;
    os << r.workload << ',' << to_string(r.strategy) << ',' << r.clients << ',' << r.accesses << ',';
    if (r.rep)
        os << *r.rep;
    else
        os << "mean";
    os << ',' << r.totals.logical_requests << ',' << r.totals.server_messages << ','
       << r.totals.wire_bytes_read << ',' << r.totals.wire_bytes_written << ',' << r.totals.useful_bytes << ','
       << std::fixed << std::setprecision(6) << r.useful_fraction << ',' << std::setprecision(0)
       << r.elapsed_us << ',' << to_string(r.verified);
    return os.str();
}

inline std::string format_csv(const BenchReport& report, bool with_header = true) {
    std::string out;
    if (with_header) {
        out += kCsvHeader;
        out += '\n';
    }
    for (const auto& r : report.rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

/// Writes the report; in append mode the header is written only to an empty file.
inline void emit_report(const BenchReport& report, const std::filesystem::path& path, bool append = false) {
    std::error_code ec;
    const bool fresh = !append || !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open report " + path.string());
    out << format_csv(report, fresh);
    if (!out) throw Error(ErrorCode::io, "failed writing report " + path.string());
}

// ---------------------------------------------------------------------------
// Matrix runner

namespace detail {

inline std::string unique_name(const std::string& stem) {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = [] {
        std::random_device rd;
        return (std::uint64_t(rd()) << 32) ^ rd();
    }();
    std::ostringstream os;
    os << stem << '-' << std::hex << salt << '-' << std::dec << ++counter;
    return os.str();
}

inline ClientMetrics run_strategy(FileSession& s, Strategy strategy, Direction dir, const AccessPlan& plan,
                                  std::span<std::byte> buffer, const BenchConfig& cfg) {
    switch (strategy) {
        case Strategy::multiple:
            return s.access_multiple(plan, dir, buffer);
        case Strategy::sieving:
            return dir == Direction::read ? s.access_sieving_read(plan, buffer, cfg.sieving)
                                          : s.access_sieving_write(plan, buffer, cfg.sieving);
        case Strategy::list:
            return s.access_list(plan, cfg.list, dir, buffer);
    }
    return {};
}

/// Writes `image` with bounded contiguous requests.
inline void populate(FileSession& s, std::span<const std::byte> image) {
    constexpr std::uint64_t chunk = 32ull << 20;
    for (std::uint64_t off = 0; off < image.size(); off += chunk)
        s.write(off, image.subspan(off, std::min<std::uint64_t>(chunk, image.size() - off)));
    s.metrics_snapshot();
}

}  // namespace detail

/// Runs one (strategy, clients, accesses) cell: `repetitions` rows then a mean row.
inline std::vector<BenchRow> run_cell(const Target& target, const BenchConfig& cfg, Strategy strategy,
                                      std::uint32_t clients, std::uint64_t accesses) {
    auto w = cfg.workload;
    w.clients = clients;
    w.accesses = accesses;
    const auto plans = workloads::generate_plans(w);
    const auto image = workloads::oracle_file_image(plans, cfg.seed);
    const StripingParams sp{0, cfg.servers, cfg.ssize};
    const bool reading = cfg.direction == Direction::read;

    BenchRow proto;
    proto.workload = workloads::to_string(w.kind);
    proto.strategy = strategy;
    proto.clients = clients;
    // Per-client file-region count for the fixed-shape workloads.
    proto.accesses = (w.kind == workloads::Kind::flash || w.kind == workloads::Kind::tiled)
                         ? plans.front().file().size()
                         : accesses;

    std::string read_file;
    if (reading) {
        read_file = detail::unique_name(proto.workload);
        auto s = FileSession::create(*target.network, target.manager_address, read_file, sp);
        detail::populate(s, image);
        s.close();
    }

    std::vector<BenchRow> rows;
    for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
        BenchRow row = proto;
        row.rep = rep;
        std::string name = read_file;
        if (!reading) {
            name = detail::unique_name(proto.workload);
            FileSession::create(*target.network, target.manager_address, name, sp).close();
        }

        std::vector<std::vector<std::byte>> buffers(clients);
        for (std::uint32_t c = 0; c < clients; ++c)
            buffers[c] = reading ? std::vector<std::byte>(plans[c].mem_span())
                                 : workloads::make_write_buffer(plans[c], cfg.seed, c);

        std::vector<ClientMetrics> metrics(clients);
        std::vector<std::string> errors(clients);
        std::latch ready(clients);
        std::latch go(1);
        std::vector<std::thread> threads;
        threads.reserve(clients);
        for (std::uint32_t c = 0; c < clients; ++c) {
            threads.emplace_back([&, c] {
                std::optional<FileSession> session;
                try {
                    session.emplace(FileSession::open(*target.network, target.manager_address, name));
                } catch (const std::exception& e) {
                    errors[c] = e.what();
                }
                ready.count_down();
                go.wait();
                if (!session) return;
                try {
                    metrics[c] = detail::run_strategy(*session, strategy, cfg.direction, plans[c], buffers[c], cfg);
                    session->close();
                } catch (const std::exception& e) {
                    errors[c] = e.what();
                }
            });
        }
        ready.wait();
        const auto t0 = std::chrono::steady_clock::now();
        go.count_down();
        for (auto& t : threads) t.join();
        row.elapsed_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();

        for (std::uint32_t c = 0; c < clients; ++c) {
            row.totals += metrics[c];
            row.per_client_logical.push_back(metrics[c].logical_requests);
            if (row.error.empty() && !errors[c].empty()) row.error = "client " + std::to_string(c) + ": " + errors[c];
        }
        const std::uint64_t moved = reading ? row.totals.wire_bytes_read : row.totals.wire_bytes_written;
        row.useful_fraction = moved ? static_cast<double>(row.totals.useful_bytes) / static_cast<double>(moved) : 0;

        if (!row.error.empty()) {
            row.verified = Verified::fail;
        } else if (cfg.verify) {
            VerifyResult v;
            if (reading) {
                for (std::uint32_t c = 0; c < clients && v.ok; ++c) v = verify_read(plans[c], image, buffers[c]);
            } else {
                auto s = FileSession::open(*target.network, target.manager_address, name);
                const auto actual = read_back_file(target, s, std::max<std::uint64_t>(image.size(), s.stat_size()));
                s.close();
                v = verify_write(image, actual);
            }
            row.verified = v.ok ? Verified::pass : Verified::fail;
            if (!v.ok) row.error = v.detail;
        }
        rows.push_back(std::move(row));
    }

    BenchRow mean = proto;
    mean.verified = Verified::pass;
    if (!cfg.verify) mean.verified = Verified::skipped;
    const double n = rows.size();
    double fraction = 0;
    ClientMetrics sum;
    std::vector<std::uint64_t> per_client(clients, 0);
    for (const auto& r : rows) {
        sum += r.totals;
        fraction += r.useful_fraction;
        mean.elapsed_us += r.elapsed_us / n;
        for (std::uint32_t c = 0; c < clients; ++c) per_client[c] += r.per_client_logical[c];
        if (r.verified == Verified::fail) mean.verified = Verified::fail;
        if (mean.error.empty()) mean.error = r.error;
    }
    const auto avg = [&](std::uint64_t v) { return static_cast<std::uint64_t>(std::llround(v / n)); };
    mean.totals.logical_requests = avg(sum.logical_requests);
    mean.totals.server_messages = avg(sum.server_messages);
    mean.totals.wire_bytes_read = avg(sum.wire_bytes_read);
    mean.totals.wire_bytes_written = avg(sum.wire_bytes_written);
    mean.totals.useful_bytes = avg(sum.useful_bytes);
    mean.totals.elapsed = sum.elapsed / rows.size();
    for (auto& v : per_client) v = avg(v);
    mean.per_client_logical = std::move(per_client);
    mean.useful_fraction = fraction / n;
    rows.push_back(std::move(mean));
    return rows;
}

/// Runs every cell sequentially; a failing cell records its error and the
/// matrix continues.
inline BenchReport run_matrix(const Target& target, const BenchConfig& cfg) {
    cfg.validate();
    BenchReport report;
    for (auto strategy : cfg.strategies)
        for (auto clients : cfg.clients)
            for (auto accesses : cfg.accesses) {
                try {
                    auto rows = run_cell(target, cfg, strategy, clients, accesses);
                    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
                } catch (const std::exception& e) {
                    BenchRow r;
                    r.workload = workloads::to_string(cfg.workload.kind);
                    r.strategy = strategy;
                    r.clients = clients;
                    r.accesses = accesses;
                    r.verified = Verified::fail;
                    r.error = e.what();
                    report.rows.push_back(std::move(r));
                }
            }
    return report;
}

// ---------------------------------------------------------------------------
// Analytic request counts

struct CountRow {
    std::string workload;
    std::uint32_t clients = 0;
    std::uint64_t file_regions = 0;
    std::uint64_t memory_regions = 0;
    std::uint64_t plan_bytes = 0;
    std::uint64_t multiple_requests = 0;
    std::uint64_t list_requests = 0;
    std::uint64_t sieving_windows = 0;
    double useful_fraction = 0;  // of the sieving extent
    std::uint64_t file_size = 0;
};

inline CountRow count_plan(const std::string& name, std::uint32_t clients, const AccessPlan& plan,
                           std::uint64_t file_size, const SievingConfig& sieving = {},
                           const ListIoConfig& list = {}) {
    CountRow r;
    r.workload = name;
    r.clients = clients;
    r.file_regions = plan.file().size();
    r.memory_regions = plan.mem().size();
    r.plan_bytes = plan.total_length();
    r.multiple_requests = count_transfer_pieces(plan.mem(), plan.file());
    r.list_requests = ceil_div(plan.file().size(), list.region_limit);
    r.sieving_windows = sieving_windows(plan.file(), sieving.buffer_size).size();
    r.useful_fraction = useful_fraction(plan.file());
    r.file_size = file_size;
    return r;
}

/// Counts for FLASH at several processor counts (processor 0) and for every
/// tile of the default display, derived from the generated plans.
inline std::vector<CountRow> analytic_counts() {
    std::vector<CountRow> rows;
    for (std::uint32_t procs : {1u, 2u, 4u, 8u}) {
        workloads::FlashSpec s;
        s.procs = procs;
        rows.push_back(count_plan("flash", procs, workloads::gen_flash(s), s.file_size()));
    }
    workloads::TiledSpec t;
    for (std::uint32_t j = 0; j < t.tiles_y; ++j)
        for (std::uint32_t i = 0; i < t.tiles_x; ++i) {
            t.tile_i = i;
            t.tile_j = j;
            rows.push_back(count_plan("tiled(" + std::to_string(i) + "," + std::to_string(j) + ")",
                                      t.tiles_x * t.tiles_y, workloads::gen_tiled(t), t.file_size()));
        }
    return rows;
}

inline std::string format_counts(const std::vector<CountRow>& rows) {
    std::ostringstream os;
    os << "workload,clients,file_regions,memory_regions,plan_bytes,multiple_requests,list_requests,"
          "sieving_requests,sieving_useful_fraction,file_size\n";
    for (const auto& r : rows)
        os << r.workload << ',' << r.clients << ',' << r.file_regions << ',' << r.memory_regions << ','
           << r.plan_bytes << ',' << r.multiple_requests << ',' << r.list_requests << ',' << r.sieving_windows
           << ',' << std::fixed << std::setprecision(6) << r.useful_fraction << ',' << r.file_size << '\n';
    return os.str();
}

}  // namespace listio::bench
