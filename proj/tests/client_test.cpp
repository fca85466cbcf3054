#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"

using namespace listio;
using namespace listio::testing;

namespace {

class ClientTest : public ::testing::Test {
protected:
    void SetUp() override {
        bench::ClusterOptions opts;
        opts.servers = 8;
        cluster = bench::Cluster::launch(opts);
    }

    FileSession create(const StripingParams& sp, std::span<const std::byte> image = {}) {
        auto s = FileSession::create(cluster->network(), cluster->manager_address(), next_name(), sp);
        if (!image.empty()) s.write(0, image);
        s.metrics_snapshot();
        return s;
    }

    std::vector<std::byte> contents(FileSession& s) {
        std::vector<std::byte> out(s.stat_size());
        s.read(0, out);
        s.metrics_snapshot();
        return out;
    }

    std::string next_name() { return "f" + std::to_string(counter++); }

    std::unique_ptr<bench::Cluster> cluster;
    int counter = 0;
};

StripingParams random_striping(Rng& rng) {
    static const std::uint32_t pcounts[] = {1, 2, 3, 8};
    StripingParams sp;
    sp.pcount = pcounts[uniform(rng, 0, 3)];
    sp.base = static_cast<std::uint32_t>(uniform(rng, 0, sp.pcount - 1));
    sp.ssize = uniform(rng, 0, 1) ? 64 : uniform(rng, 1, 5000);
    return sp;
}

/// Per-server list messages for one batch when each server sends at most
/// `limit` entries per message.
std::uint64_t expected_list_messages(const AccessPlan& plan, const StripingParams& sp, std::uint32_t limit) {
    std::uint64_t n = 0;
    for (const auto& batch : batch_regions(plan.file(), limit))
        for (const auto& [server, regions] : split_by_server(batch, sp)) n += ceil_div(regions.size(), limit);
    return n;
}

}  // namespace

TEST_F(ClientTest, ContiguousReadAcrossTwoStripes) {
    const StripingParams sp{0, 8, 16384};
    Rng rng(41);
    const auto image = random_bytes(rng, 65536);
    auto s = create(sp, image);
    std::vector<std::byte> buf(32768);
    EXPECT_EQ(s.read(0, buf), 32768u);
    const auto m = s.metrics_snapshot();
    EXPECT_EQ(m.logical_requests, 1u);
    EXPECT_EQ(m.server_messages, 2u);
    EXPECT_EQ(m.wire_bytes_read, 32768u);
    EXPECT_TRUE(std::equal(buf.begin(), buf.end(), image.begin()));
}

TEST_F(ClientTest, ZeroLengthIsANoOp) {
    auto s = create({0, 4, 64});
    std::vector<std::byte> none;
    EXPECT_EQ(s.read(100, none), 0u);
    EXPECT_EQ(s.write(100, none), 0u);
    const auto m = s.metrics_snapshot();
    EXPECT_EQ(m.logical_requests, 0u);
    EXPECT_EQ(m.server_messages, 0u);
    const AccessPlan empty;
    EXPECT_EQ(s.access_multiple(empty, Direction::read, none).server_messages, 0u);
    EXPECT_EQ(s.access_sieving_read(empty, none).server_messages, 0u);
    EXPECT_EQ(s.access_sieving_write(empty, none).server_messages, 0u);
    EXPECT_EQ(s.access_list(empty, {}, Direction::read, none).server_messages, 0u);
}

TEST_F(ClientTest, ReadsPastEndReturnZeros) {
    auto s = create({0, 2, 64}, wire::text_bytes("abc"));
    std::vector<std::byte> buf(10, std::byte{0x44});
    s.read(0, buf);
    EXPECT_EQ(wire::bytes_text(std::span(buf).first(3)), "abc");
    for (std::size_t i = 3; i < 10; ++i) EXPECT_EQ(buf[i], std::byte{0});
}

TEST_F(ClientTest, OpenMissingFileIsNotFound) {
    try {
        FileSession::open(cluster->network(), cluster->manager_address(), "missing");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}

TEST_F(ClientTest, ReadStrategiesMatchFlatOracle) {
    Rng rng(42);
    for (int iter = 0; iter < 40; ++iter) {
        const auto sp = random_striping(rng);
        const auto plan = random_plan(rng, uniform(rng, 1, 150), uniform(rng, 1, 2000), uniform(rng, 0, 3000));
        const auto image = random_bytes(rng, plan.file().back().end() + uniform(rng, 0, 100));
        auto s = create(sp, image);
        const auto expected = flat_read(plan, image);
        const SievingConfig sieve{uniform(rng, 0, 3) ? uniform(rng, 1, 20000) : kDefaultSievingBuffer};
        const ListIoConfig list{static_cast<std::uint32_t>(uniform(rng, 1, 64))};

        std::vector<std::byte> a(plan.mem_span()), b(plan.mem_span()), c(plan.mem_span());
        const auto ma = s.access_multiple(plan, Direction::read, a);
        const auto mb = s.access_sieving_read(plan, b, sieve);
        const auto mc = s.access_list(plan, list, Direction::read, c);
        ASSERT_EQ(a, expected) << "multiple, iter " << iter;
        ASSERT_EQ(b, expected) << "sieving, iter " << iter;
        ASSERT_EQ(c, expected) << "list, iter " << iter;

        EXPECT_EQ(ma.logical_requests, count_transfer_pieces(plan.mem(), plan.file()));
        EXPECT_EQ(mb.logical_requests, brute_force_windows(plan.file(), sieve.buffer_size).size());
        EXPECT_EQ(mc.logical_requests, ceil_div(plan.file().size(), list.region_limit));
        EXPECT_EQ(mc.server_messages, expected_list_messages(plan, sp, list.region_limit));
        EXPECT_EQ(mc.wire_bytes_read, plan.total_length());
        EXPECT_EQ(ma.wire_bytes_read, plan.total_length());
        EXPECT_EQ(mb.wire_bytes_read, total_length(sieving_windows(plan.file(), sieve.buffer_size)));
        for (const auto* m : {&ma, &mb, &mc}) EXPECT_EQ(m->useful_bytes, plan.total_length());
    }
}

TEST_F(ClientTest, WriteStrategiesMatchFlatOracle) {
    Rng rng(43);
    for (int iter = 0; iter < 30; ++iter) {
        const auto sp = random_striping(rng);
        const auto plan = random_plan(rng, uniform(rng, 1, 150), uniform(rng, 1, 2000), uniform(rng, 0, 3000));
        const auto initial = random_bytes(rng, uniform(rng, 1, plan.file().back().end() + 200));
        auto buffer = random_bytes(rng, plan.mem_span());
        auto expected = initial;
        flat_write(plan, buffer, expected);

        const SievingConfig sieve{uniform(rng, 1, 20000)};
        const ListIoConfig list{static_cast<std::uint32_t>(uniform(rng, 1, 64))};
        auto a = create(sp, initial);
        auto b = create(sp, initial);
        auto c = create(sp, initial);
        const auto ma = a.access_multiple(plan, Direction::write, buffer);
        const auto mb = b.access_sieving_write(plan, buffer, sieve);
        const auto mc = c.access_list(plan, list, Direction::write, buffer);
        ASSERT_EQ(contents(a), expected) << "multiple, iter " << iter;
        ASSERT_EQ(contents(b), expected) << "sieving, iter " << iter;
        ASSERT_EQ(contents(c), expected) << "list, iter " << iter;

        const auto windows = sieving_windows(plan.file(), sieve.buffer_size);
        EXPECT_EQ(ma.logical_requests, count_transfer_pieces(plan.mem(), plan.file()));
        EXPECT_EQ(mb.logical_requests, 2 * windows.size());
        EXPECT_EQ(mb.wire_bytes_written, total_length(windows));
        EXPECT_EQ(mc.logical_requests, ceil_div(plan.file().size(), list.region_limit));
        EXPECT_EQ(mc.wire_bytes_written, plan.total_length());
    }
}

TEST_F(ClientTest, ListRequestsIndependentOfMemoryLayout) {
    Rng rng(44);
    const StripingParams sp{0, 8, 64};
    const auto file = random_file_regions(rng, 300, 100, 100);
    const auto total = total_length(file);
    auto s = create(sp, random_bytes(rng, file.back().end()));
    std::optional<std::uint64_t> logical, messages;
    for (std::size_t pieces : {1u, 10u, 1000u}) {
        const AccessPlan plan(random_mem_regions(rng, total, pieces, 16), file);
        std::vector<std::byte> buf(plan.mem_span());
        const auto m = s.access_list(plan, {}, Direction::read, buf);
        if (!logical) {
            logical = m.logical_requests;
            messages = m.server_messages;
        }
        EXPECT_EQ(m.logical_requests, *logical);
        EXPECT_EQ(m.server_messages, *messages);
    }
    EXPECT_EQ(*logical, ceil_div(300, 64));
}

TEST_F(ClientTest, SievingWritePreservesUntouchedBytes) {
    Rng rng(45);
    const auto initial = random_bytes(rng, 50000);
    auto s = create({2, 8, 1000}, initial);
    const AccessPlan plan({{0, 30}}, {{100, 10}, {40000, 20}});
    const auto buffer = random_bytes(rng, 30);
    s.access_sieving_write(plan, buffer, {64 * 1024});
    const auto after = contents(s);
    ASSERT_EQ(after.size(), initial.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
        if (i >= 100 && i < 110)
            ASSERT_EQ(after[i], buffer[i - 100]);
        else if (i >= 40000 && i < 40020)
            ASSERT_EQ(after[i], buffer[10 + i - 40000]);
        else
            ASSERT_EQ(after[i], initial[i]) << i;
    }
}

TEST_F(ClientTest, ConcurrentSievingWritersInterleavedRegions) {
    Rng rng(46);
    constexpr std::uint32_t kWriters = 4;
    const StripingParams sp{0, 8, 256};
    const std::string name = next_name();
    FileSession::create(cluster->network(), cluster->manager_address(), name, sp).close();
    std::vector<AccessPlan> plans;
    for (std::uint32_t c = 0; c < kWriters; ++c) {
        workloads::CyclicSpec spec{kWriters, c, 64 * 1024, 64};
        plans.push_back(workloads::gen_cyclic(spec));
    }
    std::vector<std::thread> threads;
    for (std::uint32_t c = 0; c < kWriters; ++c)
        threads.emplace_back([&, c] {
            auto s = FileSession::open(cluster->network(), cluster->manager_address(), name);
            const auto buf = workloads::make_write_buffer(plans[c], 9, c);
            s.access_sieving_write(plans[c], buf, {4096});
            s.close();
        });
    for (auto& t : threads) t.join();
    auto s = FileSession::open(cluster->network(), cluster->manager_address(), name);
    EXPECT_EQ(contents(s), workloads::oracle_file_image(plans, 9));
}

TEST_F(ClientTest, BufferTooSmallIsRejected) {
    auto s = create({0, 1, 64});
    const AccessPlan plan({{10, 10}}, {{0, 10}});
    std::vector<std::byte> small(15);
    EXPECT_THROW(s.access_multiple(plan, Direction::read, small), Error);
    EXPECT_THROW(s.access_list(plan, {}, Direction::read, small), Error);
    std::vector<std::byte> ok(20);
    EXPECT_THROW(s.access_list(plan, {65}, Direction::read, ok), Error);
}

TEST_F(ClientTest, MetricsSnapshotResets) {
    auto s = create({0, 2, 64}, wire::text_bytes("0123456789"));
    std::vector<std::byte> buf(4);
    s.read(0, buf);
    s.read(4, buf);
    EXPECT_EQ(s.metrics_snapshot().logical_requests, 2u);
    EXPECT_EQ(s.metrics_snapshot().logical_requests, 0u);
}

TEST_F(ClientTest, TokenMessagesAreCounted) {
    auto s = create({0, 1, 64}, wire::text_bytes("0123456789"));
    const AccessPlan plan({{0, 2}}, {{1, 2}});
    std::vector<std::byte> buf{std::byte{'a'}, std::byte{'b'}};
    const auto m = s.access_sieving_write(plan, buf, {1024});
    // token acquire + window read + window write + token release
    EXPECT_EQ(m.server_messages, 4u);
    EXPECT_EQ(m.logical_requests, 2u);
    EXPECT_EQ(wire::bytes_text(contents(s)), "0ab3456789");
}

TEST(AccessPlan, ValidatesLists) {
    EXPECT_THROW(AccessPlan({{0, 4}}, {{0, 3}}), Error);
    EXPECT_THROW(AccessPlan({{0, 4}}, {{10, 2}, {0, 2}}), Error);
    EXPECT_THROW(AccessPlan({{0, 4}}, {{0, 3}, {2, 1}}), Error);
    EXPECT_THROW(AccessPlan({{0, 0}, {0, 4}}, {{0, 4}}), Error);
    const AccessPlan p({{100, 4}, {0, 2}}, {{0, 3}, {3, 3}});
    EXPECT_EQ(p.mem_span(), 104u);
    EXPECT_EQ(p.total_length(), 6u);
}
