// listio-pfs: run daemons, benchmark the noncontiguous strategies, and print
// the analytic request-count table.

#include <csignal>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "listio/listio.hpp"

namespace {

using namespace listio;

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if constexpr (std::is_same_v<T, std::string>)
            out.push_back(item);
        else
            out.push_back(static_cast<T>(std::stoull(item)));
    }
    return out;
}

int wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
    return 0;
}

struct ServeArgs {
    std::string role;
    std::string addr;
    std::string storage_root;
    std::string manager;
};

int run_serve(const ServeArgs& a) {
    Network network;
    if (a.role == "manager") {
        Manager manager(network);
        TcpServer server(manager, a.addr);
        std::cout << "manager listening on " << server.address() << std::endl;
        wait_for_signal();
        server.stop();
        return 0;
    }
    if (a.manager.empty()) {
        std::cerr << "--manager is required for --role iod\n";
        return 2;
    }
    IoDaemon daemon(a.storage_root);
    TcpServer server(daemon, a.addr);
    const auto index = register_with_manager(network, a.manager, server.address());
    std::cout << "iod " << index << " listening on " << server.address() << " storing under "
              << a.storage_root << std::endl;
    wait_for_signal();
    server.stop();
    return 0;
}

struct BenchArgs {
    std::string workload = "cyclic";
    std::string strategies = "list";
    std::string clients = "8";
    std::string accesses = "64";
    std::uint32_t servers = 8;
    std::uint64_t ssize = kDefaultStripeSize;
    std::uint64_t total_bytes = 64ull << 20;
    std::uint64_t sieving_buffer = kDefaultSievingBuffer;
    std::uint32_t list_limit = kDefaultListLimit;
    std::uint32_t reps = 3;
    bool verify = false;
    std::uint64_t seed = 1;
    std::string csv;
    bool append = false;
    std::string external;
    std::string direction;
    bool sieving_writes = false;
    std::string transport = "inproc";
    std::uint32_t flash_blocks = 80;
};

int run_bench(const BenchArgs& a) {
    bench::BenchConfig cfg;
    cfg.workload.kind = workloads::parse_kind(a.workload);
    cfg.workload.total_bytes = a.total_bytes;
    cfg.workload.flash.nblocks = a.flash_blocks;
    cfg.direction = bench::default_direction(cfg.workload.kind);
    if (a.direction == "read")
        cfg.direction = Direction::read;
    else if (a.direction == "write")
        cfg.direction = Direction::write;
    else if (!a.direction.empty())
        throw Error(ErrorCode::invalid_argument, "--direction must be read or write");
    cfg.strategies.clear();
    for (const auto& s : parse_list<std::string>(a.strategies)) cfg.strategies.push_back(bench::parse_strategy(s));
    cfg.clients = parse_list<std::uint32_t>(a.clients);
    cfg.accesses = parse_list<std::uint64_t>(a.accesses);
    cfg.servers = a.servers;
    cfg.ssize = a.ssize;
    cfg.sieving.buffer_size = a.sieving_buffer;
    cfg.list.region_limit = a.list_limit;
    cfg.repetitions = a.reps;
    cfg.verify = a.verify;
    cfg.seed = a.seed;
    cfg.allow_sieving_writes = a.sieving_writes || cfg.workload.kind == workloads::Kind::flash;

    bench::BenchReport report;
    if (!a.external.empty()) {
        Network network;
        report = bench::run_matrix({&network, a.external, {}}, cfg);
    } else {
        bench::ClusterOptions opts;
        opts.servers = a.servers;
        opts.transport = a.transport == "tcp" ? bench::TransportKind::tcp : bench::TransportKind::inproc;
        auto cluster = bench::Cluster::launch(opts);
        report = bench::run_matrix(cluster->target(), cfg);
    }

    std::cout << bench::format_csv(report);
    for (const auto& r : report.rows)
        if (!r.error.empty())
            std::cerr << r.workload << '/' << bench::to_string(r.strategy) << " clients=" << r.clients
                      << " accesses=" << r.accesses << ": " << r.error << '\n';
    if (!a.csv.empty()) bench::emit_report(report, a.csv, a.append);
    return report.all_verified() ? 0 : 1;
}

int run_verify_counts() {
    const auto rows = bench::analytic_counts();
    std::cout << bench::format_counts(rows);
    bool ok = true;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) {
            std::cerr << "count mismatch: " << what << '\n';
            ok = false;
        }
    };
    for (const auto& r : rows) {
        if (r.workload == "flash") {
            expect(r.multiple_requests == 983040, "flash multiple I/O requests per processor");
            expect(r.list_requests == 30, "flash list I/O requests per processor");
            expect(r.plan_bytes == 7864320, "flash bytes per processor");
            expect(r.clients > 4 || r.sieving_windows == 1, "flash sieving windows with <= 4 processors");
        } else {
            expect(r.multiple_requests == 768, "tiled multiple I/O requests");
            expect(r.list_requests == 12, "tiled list I/O requests");
            expect(r.file_size == 10695168, "tiled file size");
        }
    }
    std::cout << (ok ? "all counts match\n" : "COUNT MISMATCH\n");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Striped parallel file system with multiple, data sieving and list I/O"};
    app.require_subcommand(1);

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run a manager or I/O daemon over TCP");
    serve_cmd->add_option("--role", serve.role, "manager or iod")
        ->required()
        ->check(CLI::IsMember({"manager", "iod"}));
    serve_cmd->add_option("--addr", serve.addr, "HOST:PORT to listen on")->required();
    serve_cmd->add_option("--storage-root", serve.storage_root, "Directory for stripe files")->required();
    serve_cmd->add_option("--manager", serve.manager, "Manager HOST:PORT (iod only)");

    BenchArgs b;
    auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark matrix");
    bench_cmd->add_option("--workload", b.workload)->check(CLI::IsMember({"cyclic", "blockblock", "flash", "tiled"}));
    bench_cmd->add_option("--strategy", b.strategies, "multiple|sieving|list, comma-separated");
    bench_cmd->add_option("--clients", b.clients, "Client counts, comma-separated");
    bench_cmd->add_option("--servers", b.servers, "I/O servers per file");
    bench_cmd->add_option("--ssize", b.ssize, "Stripe size in bytes");
    bench_cmd->add_option("--accesses", b.accesses, "Accesses per client, comma-separated");
    bench_cmd->add_option("--total-bytes", b.total_bytes, "Aggregate bytes (cyclic, blockblock)");
    bench_cmd->add_option("--sieving-buffer", b.sieving_buffer, "Data sieving buffer in bytes");
    bench_cmd->add_option("--list-limit", b.list_limit, "Regions per list request (1-64)");
    bench_cmd->add_option("--reps", b.reps, "Repetitions per cell");
    bench_cmd->add_flag("--verify", b.verify, "Check every byte against the oracle");
    bench_cmd->add_option("--seed", b.seed);
    bench_cmd->add_option("--csv", b.csv, "Write the report to this file");
    bench_cmd->add_flag("--append", b.append, "Append to --csv instead of truncating");
    bench_cmd->add_option("--external-cluster", b.external, "Manager HOST:PORT of running daemons");
    bench_cmd->add_option("--direction", b.direction, "read or write (default depends on workload)");
    bench_cmd->add_flag("--sieving-writes", b.sieving_writes, "Allow tokened data sieving writes");
    bench_cmd->add_option("--transport", b.transport, "Local cluster transport")->check(CLI::IsMember({"inproc", "tcp"}));
    bench_cmd->add_option("--flash-blocks", b.flash_blocks, "FLASH blocks per processor");

    auto* counts_cmd = app.add_subcommand("verify-counts", "Print analytic request counts (no I/O)");

    CLI11_PARSE(app, argc, argv);

    if (serve_cmd->parsed()) {
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set, nullptr);
    }

    try {
        if (serve_cmd->parsed()) return run_serve(serve);
        if (bench_cmd->parsed()) return run_bench(b);
        if (counts_cmd->parsed()) return run_verify_counts();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
