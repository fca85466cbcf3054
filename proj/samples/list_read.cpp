// Minimal library walk-through: start an in-process cluster, write a file
// contiguously, then read a strided subset back with one list I/O call.

#include <iostream>

#include "listio/listio.hpp"

int main() {
    using namespace listio;
    bench::ClusterOptions opts;
    opts.servers = 4;
    auto cluster = bench::Cluster::launch(opts);

    auto session = FileSession::create(cluster->network(), cluster->manager_address(), "sample",
                                       StripingParams{0, 4, 4096});
    std::vector<std::byte> data(1 << 20);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::byte(i % 251);
    session.write(0, data);
    session.metrics_snapshot();

    // Every 64th KiB-sized record, gathered into one contiguous buffer.
    RegionList file;
    for (std::uint64_t off = 0; off < data.size(); off += 64 * 1024) file.push_back({off, 1024});
    AccessPlan plan({{0, total_length(file)}}, file);
    std::vector<std::byte> buffer(plan.mem_span());
    const auto m = session.access_list(plan, ListIoConfig{}, Direction::read, buffer);

    std::cout << "regions=" << file.size() << " logical_requests=" << m.logical_requests
              << " server_messages=" << m.server_messages << " bytes=" << m.useful_bytes << '\n';
    session.close();
    return buffer[1024] == data[64 * 1024] ? 0 : 1;
}
