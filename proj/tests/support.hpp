#pragma once

// Shared generators and brute-force oracles for the test binaries.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "listio/listio.hpp"

namespace listio::testing {

using Rng = std::mt19937_64;

inline std::uint64_t uniform(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

/// Sorted, disjoint file regions with random gaps (possibly zero).
inline RegionList random_file_regions(Rng& rng, std::size_t count, std::uint64_t max_len,
                                      std::uint64_t max_gap, std::uint64_t start = 0) {
    RegionList out;
    out.reserve(count);
    std::uint64_t pos = start + uniform(rng, 0, max_gap);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t len = uniform(rng, 1, max_len);
        out.push_back({pos, len});
        pos += len + uniform(rng, 0, max_gap);
    }
    return out;
}

/// Memory regions holding exactly `total` bytes, in shuffled buffer order,
/// separated by random holes.
inline RegionList random_mem_regions(Rng& rng, std::uint64_t total, std::size_t max_pieces,
                                     std::uint64_t max_gap) {
    if (total == 0) return {};
    const std::uint64_t pieces = uniform(rng, 1, std::min<std::uint64_t>(max_pieces, total));
    std::set<std::uint64_t> cuts{total};
    while (cuts.size() < pieces) cuts.insert(uniform(rng, 1, total - 1));
    RegionList slots;
    std::uint64_t pos = 0, prev = 0;
    for (auto c : cuts) {
        pos += uniform(rng, 0, max_gap);
        slots.push_back({pos, c - prev});
        pos += c - prev;
        prev = c;
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    return slots;
}

inline AccessPlan random_plan(Rng& rng, std::size_t file_count, std::uint64_t max_len, std::uint64_t max_gap) {
    auto file = random_file_regions(rng, file_count, max_len, max_gap);
    const auto total = total_length(file);
    auto mem = random_mem_regions(rng, total, file_count + 4, 64);
    return AccessPlan(std::move(mem), std::move(file));
}

/// Byte-level striping model: builds each server's local image by walking
/// every logical byte one at a time.
inline std::vector<std::vector<std::byte>> stripe_image_bytewise(std::span<const std::byte> image,
                                                                  const StripingParams& sp) {
    std::vector<std::vector<std::byte>> servers(sp.pcount);
    for (std::uint64_t g = 0; g < image.size(); ++g) {
        const std::uint64_t unit = g / sp.ssize;
        const std::uint32_t server = static_cast<std::uint32_t>((sp.base + unit) % sp.pcount);
        const std::uint64_t local = (unit / sp.pcount) * sp.ssize + g % sp.ssize;
        auto& s = servers[server];
        if (s.size() <= local) s.resize(local + 1, std::byte{0});
        s[local] = image[g];
    }
    return servers;
}

/// Per-byte map file offset -> memory offset, the flat meaning of a plan.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> byte_pairs(const AccessPlan& plan) {
    std::vector<std::uint64_t> mem_bytes;
    for (const auto& r : plan.mem())
        for (std::uint64_t i = 0; i < r.length; ++i) mem_bytes.push_back(r.offset + i);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    std::size_t k = 0;
    for (const auto& r : plan.file())
        for (std::uint64_t i = 0; i < r.length; ++i) out.emplace_back(r.offset + i, mem_bytes[k++]);
    return out;
}

/// Flat read: for each plan byte, buffer[mem] = image[file].
inline std::vector<std::byte> flat_read(const AccessPlan& plan, std::span<const std::byte> image) {
    std::vector<std::byte> buf(plan.mem_span(), std::byte{0});
    for (auto [f, m] : byte_pairs(plan)) buf[m] = f < image.size() ? image[f] : std::byte{0};
    return buf;
}

/// Flat write: for each plan byte, image[file] = buffer[mem]; grows the image.
inline void flat_write(const AccessPlan& plan, std::span<const std::byte> buffer, std::vector<std::byte>& image) {
    for (auto [f, m] : byte_pairs(plan)) {
        if (image.size() <= f) image.resize(f + 1, std::byte{0});
        image[f] = buffer[m];
    }
}

/// Every window index of `buffer_size` starting at the extent that contains
/// at least one plan byte, found by testing each byte.
inline RegionList brute_force_windows(std::span<const Region> regions, std::uint64_t buffer_size) {
    if (regions.empty()) return {};
    const std::uint64_t lo = regions.front().offset;
    const std::uint64_t hi = regions.back().end();
    std::set<std::uint64_t> hit;
    for (const auto& r : regions)
        for (std::uint64_t b = r.offset; b < r.end(); ++b) hit.insert((b - lo) / buffer_size);
    RegionList out;
    for (auto w : hit) {
        const std::uint64_t off = lo + w * buffer_size;
        out.push_back({off, std::min(buffer_size, hi - off)});
    }
    return out;
}

/// Transfer pieces by marking every region boundary in the byte stream.
inline std::uint64_t brute_force_piece_count(const AccessPlan& plan) {
    std::set<std::uint64_t> cuts;
    std::uint64_t pos = 0;
    for (const auto& r : plan.mem()) cuts.insert(pos += r.length);
    pos = 0;
    for (const auto& r : plan.file()) cuts.insert(pos += r.length);
    cuts.erase(0);
    return cuts.size();
}

inline std::vector<std::byte> random_bytes(Rng& rng, std::size_t n) {
    std::vector<std::byte> out(n);
    for (auto& b : out) b = static_cast<std::byte>(rng() & 0xff);
    return out;
}

}  // namespace listio::testing
