#pragma once

// Region algebra shared by every access strategy: round-robin striping,
// memory x file intersection, batching, extents and sieving windows.
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "listio/error.hpp"

namespace listio {

inline constexpr std::uint64_t kDefaultStripeSize = 16384;
inline constexpr std::uint32_t kDefaultListLimit = 64;

struct Region {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    constexpr std::uint64_t end() const noexcept { return offset + length; }
    friend constexpr bool operator==(const Region&, const Region&) = default;
};

using RegionList = std::vector<Region>;

inline std::uint64_t total_length(std::span<const Region> regions) noexcept {
    std::uint64_t sum = 0;
    for (const auto& r : regions) sum += r.length;
    return sum;
}

/// Throws plan_invalid unless every region is non-empty and does not wrap.
inline void check_regions(std::span<const Region> regions, const char* what) {
    for (const auto& r : regions) {
        if (r.length == 0)
            throw Error(ErrorCode::plan_invalid, std::string(what) + ": zero-length region");
        if (r.offset > std::numeric_limits<std::uint64_t>::max() - r.length)
            throw Error(ErrorCode::plan_invalid, std::string(what) + ": region overflows 64 bits");
    }
}

/// Sorted by offset and pairwise non-overlapping (adjacency is allowed).
inline bool is_sorted_disjoint(std::span<const Region> regions) noexcept {
    for (std::size_t i = 1; i < regions.size(); ++i)
        if (regions[i].offset < regions[i - 1].end()) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Striping

struct StripingParams {
    std::uint32_t base = 0;
    std::uint32_t pcount = 1;
    std::uint64_t ssize = kDefaultStripeSize;

    void validate() const {
        if (pcount == 0) throw Error(ErrorCode::invalid_argument, "pcount must be >= 1");
        if (ssize == 0) throw Error(ErrorCode::invalid_argument, "stripe size must be >= 1");
        if (base >= pcount) throw Error(ErrorCode::invalid_argument, "base must be < pcount");
    }

    friend constexpr bool operator==(const StripingParams&, const StripingParams&) = default;
};

struct StripeLocation {
    std::uint32_t server = 0;
    std::uint64_t local_offset = 0;

    friend constexpr bool operator==(const StripeLocation&, const StripeLocation&) = default;
};

inline StripeLocation stripe_location(std::uint64_t offset, const StripingParams& sp) noexcept {
    const std::uint64_t k = offset / sp.ssize;
    return {static_cast<std::uint32_t>((sp.base + k) % sp.pcount),
            (k / sp.pcount) * sp.ssize + offset % sp.ssize};
}

/// Inverse of stripe_location.
inline std::uint64_t global_offset(std::uint32_t server, std::uint64_t local_offset,
                                   const StripingParams& sp) noexcept {
    const std::uint64_t row = local_offset / sp.ssize;
    const std::uint64_t column = (server + sp.pcount - sp.base % sp.pcount) % sp.pcount;
    return (row * sp.pcount + column) * sp.ssize + local_offset % sp.ssize;
}

/// Logical file size implied by a server-local size on one server.
inline std::uint64_t global_end_for_local_size(std::uint32_t server, std::uint64_t local_size,
                                               const StripingParams& sp) noexcept {
    if (local_size == 0) return 0;
    return global_offset(server, local_size - 1, sp) + 1;
}

/// A piece of a file region that lies within a single stripe unit.
struct StripeChunk {
    std::uint64_t file_offset = 0;
    std::uint64_t length = 0;
    std::uint32_t server = 0;
    std::uint64_t local_offset = 0;
};

/// Calls fn(StripeChunk) for every stripe-unit piece of `region`, in file order.
template <typename Fn>
void for_each_stripe_chunk(const Region& region, const StripingParams& sp, Fn&& fn) {
    std::uint64_t pos = region.offset;
    const std::uint64_t end = region.end();
    while (pos < end) {
        const std::uint64_t unit_end = (pos / sp.ssize + 1) * sp.ssize;
        const std::uint64_t len = std::min(end, unit_end) - pos;
        const auto loc = stripe_location(pos, sp);
        fn(StripeChunk{pos, len, loc.server, loc.local_offset});
        pos += len;
    }
}

inline std::vector<StripeChunk> stripe_chunks(std::span<const Region> regions,
                                              const StripingParams& sp) {
    std::vector<StripeChunk> out;
    for (const auto& r : regions)
        for_each_stripe_chunk(r, sp, [&](const StripeChunk& c) { out.push_back(c); });
    return out;
}

/// Splits file regions at stripe edges and groups them per server using
/// server-local offsets. Per-server lists come out sorted because the input is.
inline std::map<std::uint32_t, RegionList> split_by_server(std::span<const Region> file_regions,
                                                           const StripingParams& sp) {
    std::map<std::uint32_t, RegionList> out;
    for (const auto& r : file_regions)
        for_each_stripe_chunk(r, sp, [&](const StripeChunk& c) {
            out[c.server].push_back({c.local_offset, c.length});
        });
    return out;
}

// ---------------------------------------------------------------------------
// Memory x file intersection

struct TransferPiece {
    std::uint64_t mem_offset = 0;
    std::uint64_t file_offset = 0;
    std::uint64_t length = 0;

    friend constexpr bool operator==(const TransferPiece&, const TransferPiece&) = default;
};

/// Walks both lists in plan order and calls fn(TransferPiece) for every span
/// bounded by a region edge in either list. Adjacent regions are never merged.
template <typename Fn>
void for_each_transfer_piece(std::span<const Region> mem, std::span<const Region> file, Fn&& fn) {
    if (total_length(mem) != total_length(file))
        throw Error(ErrorCode::plan_invalid, "memory and file lists differ in total length");
    std::size_t mi = 0, fi = 0;
    std::uint64_t mused = 0, fused = 0;
    while (mi < mem.size() && fi < file.size()) {
        const std::uint64_t len = std::min(mem[mi].length - mused, file[fi].length - fused);
        if (len > 0) fn(TransferPiece{mem[mi].offset + mused, file[fi].offset + fused, len});
        mused += len;
        fused += len;
        if (mused == mem[mi].length) { ++mi; mused = 0; }
        if (fused == file[fi].length) { ++fi; fused = 0; }
    }
}

inline std::vector<TransferPiece> intersect_transfer_pieces(std::span<const Region> mem,
                                                            std::span<const Region> file) {
    std::vector<TransferPiece> out;
    for_each_transfer_piece(mem, file, [&](const TransferPiece& p) { out.push_back(p); });
    return out;
}

inline std::uint64_t count_transfer_pieces(std::span<const Region> mem,
                                           std::span<const Region> file) {
    std::uint64_t n = 0;
    for_each_transfer_piece(mem, file, [&](const TransferPiece&) { ++n; });
    return n;
}

// ---------------------------------------------------------------------------
// Batching, extents, coalescing

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) noexcept { return (a + b - 1) / b; }

inline std::vector<RegionList> batch_regions(std::span<const Region> regions,
                                             std::size_t limit = kDefaultListLimit) {
    if (limit == 0) throw Error(ErrorCode::invalid_argument, "batch limit must be >= 1");
    std::vector<RegionList> out;
    out.reserve(ceil_div(regions.size(), limit));
    for (std::size_t i = 0; i < regions.size(); i += limit) {
        const std::size_t n = std::min(limit, regions.size() - i);
        out.emplace_back(regions.begin() + static_cast<std::ptrdiff_t>(i),
                         regions.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    return out;
}

/// Covering region of a sorted list: first offset to last end.
inline Region extent(std::span<const Region> regions) {
    if (regions.empty()) throw Error(ErrorCode::invalid_argument, "extent of empty region list");
    return {regions.front().offset, regions.back().end() - regions.front().offset};
}

inline RegionList coalesce(std::span<const Region> regions) {
    RegionList out;
    for (const auto& r : regions) {
        if (!out.empty() && r.offset <= out.back().end()) {
            auto& last = out.back();
            last.length = std::max(last.end(), r.end()) - last.offset;
        } else {
            out.push_back(r);
        }
    }
    return out;
}

inline double useful_fraction(std::span<const Region> regions) {
    const Region e = extent(regions);
    return static_cast<double>(total_length(regions)) / static_cast<double>(e.length);
}

/// Sieving windows: the extent cut into buffer_size pieces starting at its
/// offset (last one clipped), keeping only windows that hold a plan byte.
inline RegionList sieving_windows(std::span<const Region> regions, std::uint64_t buffer_size) {
    if (buffer_size == 0) throw Error(ErrorCode::invalid_argument, "sieving buffer must be >= 1");
    RegionList out;
    if (regions.empty()) return out;
    const Region e = extent(regions);
    std::uint64_t next = 0;  // first window index not yet emitted
    for (const auto& r : regions) {
        const std::uint64_t first = (r.offset - e.offset) / buffer_size;
        const std::uint64_t last = (r.end() - 1 - e.offset) / buffer_size;
        for (std::uint64_t w = std::max(first, next); w <= last; ++w) {
            const std::uint64_t off = e.offset + w * buffer_size;
            out.push_back({off, std::min(buffer_size, e.end() - off)});
        }
        next = std::max(next, last + 1);
    }
    return out;
}

}  // namespace listio
