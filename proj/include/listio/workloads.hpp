#pragma once

// Access-plan generators for the four benchmark patterns (1-D cyclic,
// block-block, FLASH checkpoint, tiled visualization) plus the deterministic
// byte oracle used to populate files and check results.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "listio/client.hpp"
#include "listio/error.hpp"
#include "listio/region.hpp"

namespace listio::workloads {

// ---------------------------------------------------------------------------
// 1-D cyclic

struct CyclicSpec {
    std::uint32_t clients = 1;
    std::uint32_t client_id = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t accesses_per_client = 1;
};

inline AccessPlan gen_cyclic(const CyclicSpec& s) {
    if (s.clients == 0 || s.client_id >= s.clients || s.accesses_per_client == 0)
        throw Error(ErrorCode::spec, "cyclic: bad client or access count");
    const std::uint64_t units = std::uint64_t{s.clients} * s.accesses_per_client;
    if (s.total_bytes == 0 || s.total_bytes % units != 0)
        throw Error(ErrorCode::spec, "cyclic: total bytes must be divisible by clients * accesses");
    const std::uint64_t block = s.total_bytes / units;
    RegionList file;
    file.reserve(s.accesses_per_client);
    for (std::uint64_t i = 0; i < s.accesses_per_client; ++i)
        file.push_back({(i * s.clients + s.client_id) * block, block});
    return AccessPlan({{0, s.total_bytes / s.clients}}, std::move(file));
}

// ---------------------------------------------------------------------------
// Block-block

/// A square byte array of side `array_side` split into grid x grid blocks;
/// client (row, col) owns one block.
struct BlockBlockSpec {
    std::uint32_t grid = 1;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::uint64_t array_side = 0;
    std::uint64_t accesses_per_client = 1;
};

inline AccessPlan gen_blockblock(const BlockBlockSpec& s) {
    if (s.grid == 0 || s.row >= s.grid || s.col >= s.grid)
        throw Error(ErrorCode::spec, "block-block: bad grid coordinates");
    if (s.array_side == 0 || s.array_side % s.grid != 0)
        throw Error(ErrorCode::spec, "block-block: array side must be divisible by the grid");
    const std::uint64_t seg = s.array_side / s.grid;
    if (s.accesses_per_client == 0 || s.accesses_per_client % seg != 0)
        throw Error(ErrorCode::spec, "block-block: accesses must be a multiple of the block side");
    const std::uint64_t per_row = s.accesses_per_client / seg;
    if (seg % per_row != 0)
        throw Error(ErrorCode::spec, "block-block: row segment does not split into equal pieces");
    const std::uint64_t piece = seg / per_row;
    RegionList file;
    file.reserve(s.accesses_per_client);
    for (std::uint64_t r = 0; r < seg; ++r) {
        const std::uint64_t row_start = (s.row * seg + r) * s.array_side + s.col * seg;
        for (std::uint64_t k = 0; k < per_row; ++k) file.push_back({row_start + k * piece, piece});
    }
    return AccessPlan({{0, seg * seg}}, std::move(file));
}

/// Bytes per access when `total` bytes are split over clients x accesses.
inline double bytes_per_access(std::uint64_t total, std::uint64_t clients, std::uint64_t accesses) {
    return static_cast<double>(total) / static_cast<double>(clients) / static_cast<double>(accesses);
}

// ---------------------------------------------------------------------------
// FLASH checkpoint

struct FlashSpec {
    std::uint32_t procs = 1;
    std::uint32_t proc_id = 0;
    std::uint32_t nblocks = 80;
    std::uint32_t nb = 8;  // interior elements per axis
    std::uint32_t guard = 4;
    std::uint32_t nvars = 24;
    std::uint32_t element_size = 8;

    std::uint64_t side() const noexcept { return nb + 2ull * guard; }
    std::uint64_t interior() const noexcept { return std::uint64_t{nb} * nb * nb; }
    /// Bytes of one in-memory block, guard cells included.
    std::uint64_t block_bytes() const noexcept { return side() * side() * side() * nvars * element_size; }
    std::uint64_t memory_bytes() const noexcept { return block_bytes() * nblocks; }
    std::uint64_t bytes_per_proc() const noexcept { return interior() * nvars * nblocks * element_size; }
    std::uint64_t file_size() const noexcept { return bytes_per_proc() * procs; }
};

/// Checkpoint write plan. Memory: per block a side^3 cube of elements with
/// the variables innermost, guard cells never written. File: variable-major,
/// then block, then processor, each chunk an nb^3 interior in z,y,x order.
inline AccessPlan gen_flash(const FlashSpec& s) {
    if (s.procs == 0 || s.proc_id >= s.procs || s.nblocks == 0 || s.nb == 0 || s.nvars == 0 ||
        s.element_size == 0)
        throw Error(ErrorCode::spec, "flash: all parameters must be positive");
    const std::uint64_t es = s.element_size;
    const std::uint64_t side = s.side();
    const std::uint64_t chunk = s.interior() * es;
    RegionList mem;
    RegionList file;
    mem.reserve(s.interior() * s.nblocks * s.nvars);
    file.reserve(std::uint64_t{s.nblocks} * s.nvars);
    for (std::uint64_t v = 0; v < s.nvars; ++v) {
        for (std::uint64_t b = 0; b < s.nblocks; ++b) {
            file.push_back({((v * s.nblocks + b) * s.procs + s.proc_id) * chunk, chunk});
            const std::uint64_t block_base = b * s.block_bytes();
            for (std::uint64_t z = 0; z < s.nb; ++z)
                for (std::uint64_t y = 0; y < s.nb; ++y)
                    for (std::uint64_t x = 0; x < s.nb; ++x) {
                        const std::uint64_t elem = ((z + s.guard) * side + (y + s.guard)) * side + (x + s.guard);
                        mem.push_back({block_base + (elem * s.nvars + v) * es, es});
                    }
        }
    }
    return AccessPlan(std::move(mem), std::move(file));
}

// ---------------------------------------------------------------------------
// Tiled visualization

struct TiledSpec {
    std::uint32_t tiles_x = 3;
    std::uint32_t tiles_y = 2;
    std::uint64_t tile_w = 1024;
    std::uint64_t tile_h = 768;
    std::uint64_t bytes_per_pixel = 3;
    std::uint64_t overlap_x = 270;
    std::uint64_t overlap_y = 128;
    std::uint32_t tile_i = 0;
    std::uint32_t tile_j = 0;

    std::uint64_t width() const noexcept { return tiles_x * tile_w - (tiles_x - 1) * overlap_x; }
    std::uint64_t height() const noexcept { return tiles_y * tile_h - (tiles_y - 1) * overlap_y; }
    std::uint64_t file_size() const noexcept { return width() * height() * bytes_per_pixel; }
};

/// Read plan for tile (tile_i, tile_j) of a row-major frame.
inline AccessPlan gen_tiled(const TiledSpec& s) {
    if (s.tiles_x == 0 || s.tiles_y == 0 || s.tile_w == 0 || s.tile_h == 0 || s.bytes_per_pixel == 0)
        throw Error(ErrorCode::spec, "tiled: dimensions must be positive");
    if (s.overlap_x >= s.tile_w || s.overlap_y >= s.tile_h)
        throw Error(ErrorCode::spec, "tiled: overlap must be smaller than the tile");
    if (s.tile_i >= s.tiles_x || s.tile_j >= s.tiles_y) throw Error(ErrorCode::spec, "tiled: tile out of range");
    const std::uint64_t x0 = s.tile_i * (s.tile_w - s.overlap_x);
    const std::uint64_t y0 = s.tile_j * (s.tile_h - s.overlap_y);
    const std::uint64_t w = s.width();
    RegionList file;
    file.reserve(s.tile_h);
    for (std::uint64_t row = 0; row < s.tile_h; ++row)
        file.push_back({((y0 + row) * w + x0) * s.bytes_per_pixel, s.tile_w * s.bytes_per_pixel});
    return AccessPlan({{0, s.tile_w * s.tile_h * s.bytes_per_pixel}}, std::move(file));
}

// ---------------------------------------------------------------------------
// Whole-workload description (one plan per client)

enum class Kind { cyclic, blockblock, flash, tiled };

inline const char* to_string(Kind k) noexcept {
    switch (k) {
        case Kind::cyclic: return "cyclic";
        case Kind::blockblock: return "blockblock";
        case Kind::flash: return "flash";
        case Kind::tiled: return "tiled";
    }
    return "?";
}

inline Kind parse_kind(const std::string& s) {
    if (s == "cyclic") return Kind::cyclic;
    if (s == "blockblock") return Kind::blockblock;
    if (s == "flash") return Kind::flash;
    if (s == "tiled") return Kind::tiled;
    throw Error(ErrorCode::invalid_argument, "unknown workload: " + s);
}

struct Workload {
    Kind kind = Kind::cyclic;
    std::uint32_t clients = 1;
    std::uint64_t total_bytes = 64ull << 20;  // cyclic, blockblock
    std::uint64_t accesses = 64;              // per client; cyclic, blockblock
    FlashSpec flash;                          // procs/proc_id taken from clients
    TiledSpec tiled;                          // tile taken from client index
};

inline std::uint64_t exact_sqrt(std::uint64_t v, const char* what) {
    auto r = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(v))));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    if (r * r != v) throw Error(ErrorCode::spec, std::string(what) + " must be a perfect square");
    return r;
}

inline AccessPlan generate_plan(const Workload& w, std::uint32_t client) {
    switch (w.kind) {
        case Kind::cyclic:
            return gen_cyclic({w.clients, client, w.total_bytes, w.accesses});
        case Kind::blockblock: {
            const auto q = static_cast<std::uint32_t>(exact_sqrt(w.clients, "block-block client count"));
            const auto side = exact_sqrt(w.total_bytes, "block-block total bytes");
            return gen_blockblock({q, client / q, client % q, side, w.accesses});
        }
        case Kind::flash: {
            FlashSpec s = w.flash;
            s.procs = w.clients;
            s.proc_id = client;
            return gen_flash(s);
        }
        case Kind::tiled: {
            TiledSpec s = w.tiled;
            if (w.clients != s.tiles_x * s.tiles_y)
                throw Error(ErrorCode::spec, "tiled: clients must equal tiles_x * tiles_y");
            s.tile_i = client % s.tiles_x;
            s.tile_j = client / s.tiles_x;
            return gen_tiled(s);
        }
    }
    throw Error(ErrorCode::spec, "unknown workload");
}

inline std::vector<AccessPlan> generate_plans(const Workload& w) {
    std::vector<AccessPlan> plans;
    plans.reserve(w.clients);
    for (std::uint32_t c = 0; c < w.clients; ++c) plans.push_back(generate_plan(w, c));
    return plans;
}

// ---------------------------------------------------------------------------
// Byte oracle

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Byte `position` of client `client`'s plan stream. Never zero, so a hole
/// left by a lost write is always detectable.
inline std::byte oracle_byte(std::uint64_t seed, std::uint32_t client, std::uint64_t position) noexcept {
    const std::uint64_t h = splitmix64(seed ^ splitmix64((std::uint64_t{client} << 40) ^ (position >> 3)));
    const auto b = static_cast<std::uint8_t>(h >> (8 * (position & 7)));
    return std::byte{b == 0 ? std::uint8_t{0x5A} : b};
}

inline void fill_stream(std::span<std::byte> out, std::uint64_t seed, std::uint32_t client,
                        std::uint64_t first_position = 0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = oracle_byte(seed, client, first_position + i);
}

inline constexpr std::byte kUnusedMemory{0xEE};

/// Client memory for a write: plan bytes from the oracle stream, every other
/// byte (guard cells, gaps) set to a filler that must never reach the file.
inline std::vector<std::byte> make_write_buffer(const AccessPlan& plan, std::uint64_t seed, std::uint32_t client) {
    std::vector<std::byte> buf(plan.mem_span(), kUnusedMemory);
    std::uint64_t pos = 0;
    for (const auto& r : plan.mem()) {
        fill_stream(std::span(buf).subspan(r.offset, r.length), seed, client, pos);
        pos += r.length;
    }
    return buf;
}

/// File regions' bytes of `image` concatenated in plan order.
inline std::vector<std::byte> extract_file_stream(std::span<const std::byte> image, const AccessPlan& plan) {
    std::vector<std::byte> out;
    out.reserve(plan.total_length());
    for (const auto& r : plan.file()) {
        if (r.end() > image.size()) throw Error(ErrorCode::invalid_argument, "plan reaches past the image");
        out.insert(out.end(), image.begin() + static_cast<std::ptrdiff_t>(r.offset),
                   image.begin() + static_cast<std::ptrdiff_t>(r.end()));
    }
    return out;
}

/// Memory regions' bytes of `buffer` concatenated in plan order.
inline std::vector<std::byte> gather_memory_stream(std::span<const std::byte> buffer, const AccessPlan& plan) {
    std::vector<std::byte> out;
    out.reserve(plan.total_length());
    for (const auto& r : plan.mem())
        out.insert(out.end(), buffer.begin() + static_cast<std::ptrdiff_t>(r.offset),
                   buffer.begin() + static_cast<std::ptrdiff_t>(r.end()));
    return out;
}

inline std::uint64_t file_end(const std::vector<AccessPlan>& plans) {
    std::uint64_t end = 0;
    for (const auto& p : plans)
        if (!p.file().empty()) end = std::max(end, p.file().back().end());
    return end;
}

/// Expected file contents after every client writes its oracle stream
/// through its plan, in client order; bytes no plan touches are zero.
inline std::vector<std::byte> oracle_file_image(const std::vector<AccessPlan>& plans, std::uint64_t seed) {
    std::vector<std::byte> image(file_end(plans), std::byte{0});
    for (std::uint32_t c = 0; c < plans.size(); ++c) {
        std::uint64_t pos = 0;
        for (const auto& r : plans[c].file()) {
            fill_stream(std::span(image).subspan(r.offset, r.length), seed, c, pos);
            pos += r.length;
        }
    }
    return image;
}

}  // namespace listio::workloads
