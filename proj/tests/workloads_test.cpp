#include <gtest/gtest.h>

#include "support.hpp"

using namespace listio;
using namespace listio::testing;
using namespace listio::workloads;

namespace {

/// Union of every client's file bytes; fails on any byte claimed twice.
void expect_partition(const std::vector<AccessPlan>& plans, std::uint64_t size) {
    std::vector<int> owner(size, -1);
    for (std::size_t c = 0; c < plans.size(); ++c)
        for (const auto& r : plans[c].file())
            for (auto b = r.offset; b < r.end(); ++b) {
                ASSERT_LT(b, size);
                ASSERT_EQ(owner[b], -1) << "byte " << b << " claimed twice";
                owner[b] = static_cast<int>(c);
            }
    for (std::uint64_t b = 0; b < size; ++b) ASSERT_NE(owner[b], -1) << "byte " << b << " unclaimed";
}

/// FLASH memory offsets for processor 0 found by scanning every element of
/// every block and keeping the interior ones, in file order.
std::vector<std::uint64_t> flash_interior_offsets(const FlashSpec& s, std::uint32_t var, std::uint32_t block) {
    const std::uint64_t side = s.nb + 2ull * s.guard;
    std::vector<std::uint64_t> out;
    for (std::uint64_t z = 0; z < side; ++z)
        for (std::uint64_t y = 0; y < side; ++y)
            for (std::uint64_t x = 0; x < side; ++x) {
                const bool interior = z >= s.guard && z < s.guard + s.nb && y >= s.guard &&
                                      y < s.guard + s.nb && x >= s.guard && x < s.guard + s.nb;
                if (!interior) continue;
                const std::uint64_t elem = (z * side + y) * side + x;
                out.push_back(block * s.block_bytes() + (elem * s.nvars + var) * s.element_size);
            }
    return out;
}

}  // namespace

TEST(Cyclic, KnownOffsets) {
    const auto p0 = gen_cyclic({2, 0, 64, 4});
    const auto p1 = gen_cyclic({2, 1, 64, 4});
    EXPECT_EQ(p0.file(), (RegionList{{0, 8}, {16, 8}, {32, 8}, {48, 8}}));
    EXPECT_EQ(p1.file(), (RegionList{{8, 8}, {24, 8}, {40, 8}, {56, 8}}));
    EXPECT_EQ(p0.mem(), (RegionList{{0, 32}}));
}

TEST(Cyclic, PartitionAndFragmentationLaw) {
    for (std::uint32_t clients : {1u, 3u, 8u})
        for (std::uint64_t a : {1u, 4u, 64u}) {
            Workload w{Kind::cyclic, clients, std::uint64_t{clients} * a * 16, a, {}, {}};
            const auto plans = generate_plans(w);
            for (const auto& p : plans) EXPECT_EQ(p.file().size(), a);
            expect_partition(plans, w.total_bytes);
        }
    EXPECT_THROW(gen_cyclic({3, 0, 100, 4}), Error);
    EXPECT_DOUBLE_EQ(bytes_per_access(64ull << 20, 8, 1u << 14), 512.0);
}

TEST(BlockBlock, FollowsRowSegmentFormula) {
    // q=2, S=8, client (0,0): rows 0..3, columns 0..3, one piece per row at A=4.
    const auto p = gen_blockblock({2, 0, 0, 8, 4});
    EXPECT_EQ(p.file(), (RegionList{{0, 4}, {8, 4}, {16, 4}, {24, 4}}));
    // A=8 splits every row segment into two adjacent, separate pieces.
    const auto q = gen_blockblock({2, 1, 1, 8, 8});
    EXPECT_EQ(q.file(), (RegionList{{36, 2}, {38, 2}, {44, 2}, {46, 2}, {52, 2}, {54, 2}, {60, 2}, {62, 2}}));
    EXPECT_EQ(q.mem(), (RegionList{{0, 16}}));
    EXPECT_THROW(gen_blockblock({2, 0, 0, 8, 6}), Error);
    EXPECT_THROW(gen_blockblock({3, 0, 0, 8, 8}), Error);
}

TEST(BlockBlock, PartitionForEveryGrid) {
    for (std::uint32_t q : {1u, 2u, 4u}) {
        const std::uint64_t side = 64;
        const std::uint64_t seg = side / q;
        Workload w{Kind::blockblock, q * q, side * side, seg * 2, {}, {}};
        const auto plans = generate_plans(w);
        for (const auto& p : plans) {
            EXPECT_EQ(p.file().size(), w.accesses);
            EXPECT_EQ(p.total_length(), seg * seg);
        }
        expect_partition(plans, side * side);
    }
}

TEST(Flash, SingleBlockSingleVariable) {
    FlashSpec s;
    s.nblocks = 1;
    s.nvars = 1;
    const auto p = gen_flash(s);
    EXPECT_EQ(p.file(), (RegionList{{0, 4096}}));
    ASSERT_EQ(p.mem().size(), 512u);
    const auto expected = flash_interior_offsets(s, 0, 0);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(p.mem()[i], (Region{expected[i], 8}));
}

TEST(Flash, MemoryRegionsMatchGuardScan) {
    FlashSpec s;
    s.nblocks = 3;
    s.nvars = 4;
    s.procs = 2;
    const auto p = gen_flash(s);
    std::size_t k = 0;
    for (std::uint32_t v = 0; v < s.nvars; ++v)
        for (std::uint32_t b = 0; b < s.nblocks; ++b)
            for (auto off : flash_interior_offsets(s, v, b)) ASSERT_EQ(p.mem()[k++], (Region{off, 8}));
    EXPECT_EQ(k, p.mem().size());
}

TEST(Flash, PaperParameterCounts) {
    const FlashSpec s;
    const auto p = gen_flash(s);
    EXPECT_EQ(p.file().size(), 1920u);
    EXPECT_EQ(p.mem().size(), 983040u);
    EXPECT_EQ(p.total_length(), 7864320u);
    EXPECT_EQ(s.bytes_per_proc(), 7864320u);
    EXPECT_EQ(count_transfer_pieces(p.mem(), p.file()), 983040u);
    EXPECT_EQ(ceil_div(p.file().size(), 64), 30u);
}

TEST(Flash, PartitionAcrossProcessors) {
    Workload w;
    w.kind = Kind::flash;
    w.clients = 3;
    w.flash.nblocks = 2;
    w.flash.nvars = 3;
    w.flash.nb = 4;
    const auto plans = generate_plans(w);
    FlashSpec s = w.flash;
    s.procs = 3;
    expect_partition(plans, s.file_size());
}

TEST(Flash, GuardCellsNeverReachTheFile) {
    FlashSpec s;
    s.nblocks = 2;
    s.nvars = 2;
    const auto p = gen_flash(s);
    const auto buf = make_write_buffer(p, 5, 0);
    std::vector<bool> used(buf.size(), false);
    for (const auto& r : p.mem())
        for (auto b = r.offset; b < r.end(); ++b) used[b] = true;
    for (std::size_t i = 0; i < buf.size(); ++i)
        if (!used[i]) {
            ASSERT_EQ(buf[i], kUnusedMemory);
        }
    for (auto b : oracle_file_image({p}, 5)) ASSERT_NE(b, std::byte{0});
}

TEST(Tiled, PaperParameterCounts) {
    TiledSpec s;
    EXPECT_EQ(s.width(), 2532u);
    EXPECT_EQ(s.height(), 1408u);
    EXPECT_EQ(s.file_size(), 10695168u);
    for (std::uint32_t j = 0; j < 2; ++j)
        for (std::uint32_t i = 0; i < 3; ++i) {
            s.tile_i = i;
            s.tile_j = j;
            const auto p = gen_tiled(s);
            EXPECT_EQ(p.file().size(), 768u);
            for (const auto& r : p.file()) EXPECT_EQ(r.length, 3072u);
            EXPECT_EQ(ceil_div(p.file().size(), 64), 12u);
            EXPECT_LE(p.file().back().end(), s.file_size());
        }
}

TEST(Tiled, OverlapOnlyInsideBands) {
    TiledSpec s;
    s.tile_w = 40;
    s.tile_h = 30;
    s.overlap_x = 7;
    s.overlap_y = 5;
    s.bytes_per_pixel = 1;
    std::vector<int> hits(s.file_size(), 0);
    for (std::uint32_t j = 0; j < s.tiles_y; ++j)
        for (std::uint32_t i = 0; i < s.tiles_x; ++i) {
            s.tile_i = i;
            s.tile_j = j;
            const auto plan = gen_tiled(s);
            for (const auto& r : plan.file())
                for (auto b = r.offset; b < r.end(); ++b) ++hits[b];
        }
    for (std::uint64_t b = 0; b < hits.size(); ++b) {
        const std::uint64_t x = b % s.width();
        const std::uint64_t y = b / s.width();
        bool in_x_band = false, in_y_band = false;
        for (std::uint32_t i = 1; i < s.tiles_x; ++i) {
            const std::uint64_t start = i * (s.tile_w - s.overlap_x);
            if (x >= start && x < start + s.overlap_x) in_x_band = true;
        }
        for (std::uint32_t j = 1; j < s.tiles_y; ++j) {
            const std::uint64_t start = j * (s.tile_h - s.overlap_y);
            if (y >= start && y < start + s.overlap_y) in_y_band = true;
        }
        ASSERT_GE(hits[b], 1);
        if (!in_x_band && !in_y_band) {
            ASSERT_EQ(hits[b], 1) << x << "," << y;
        }
    }
}

TEST(Oracle, StreamsAreDeterministicAndNonZero) {
    for (std::uint32_t c = 0; c < 4; ++c)
        for (std::uint64_t pos = 0; pos < 5000; ++pos) {
            ASSERT_NE(oracle_byte(3, c, pos), std::byte{0});
            ASSERT_EQ(oracle_byte(3, c, pos), oracle_byte(3, c, pos));
        }
    int differ = 0;
    for (std::uint64_t pos = 0; pos < 256; ++pos) differ += oracle_byte(3, 0, pos) != oracle_byte(3, 1, pos);
    EXPECT_GT(differ, 200);
}

TEST(Oracle, WriteBufferGathersToFileStream) {
    Rng rng(51);
    for (int iter = 0; iter < 50; ++iter) {
        const auto plan = random_plan(rng, uniform(rng, 1, 30), 100, 50);
        const auto buf = make_write_buffer(plan, 8, 2);
        const auto image = oracle_file_image({AccessPlan(), AccessPlan(), plan}, 8);
        EXPECT_EQ(extract_file_stream(image, plan), gather_memory_stream(buf, plan));
    }
}

TEST(Workload, ParsesKindsAndRejectsBadCounts) {
    EXPECT_EQ(parse_kind("flash"), Kind::flash);
    EXPECT_THROW(parse_kind("nope"), Error);
    Workload w;
    w.kind = Kind::blockblock;
    w.clients = 3;
    EXPECT_THROW(generate_plans(w), Error);
    w.kind = Kind::tiled;
    w.clients = 5;
    EXPECT_THROW(generate_plans(w), Error);
}
