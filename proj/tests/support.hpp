#pragma once

// Generators and brute-force oracles shared by the unit tests and the
// acceptance binary. Oracles are written independently of the library code
// they check: no distance transforms, no stacks, no shared helpers.

#include "conncrack/image.hpp"
#include "conncrack/nn/tensor.hpp"
#include "conncrack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace testsupport {

using conncrack::BinaryMask;
using conncrack::Rng;

/// Random mask with crack density p.
inline BinaryMask random_mask(Rng& rng, std::size_t h, std::size_t w, double p) {
    BinaryMask m(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) m.set(y, x, rng.bernoulli(p));
    return m;
}

/// Random mask with random extents in [1, max_h] x [1, max_w] and a random
/// density, so sparse, dense, empty and full masks all show up.
inline BinaryMask random_shaped_mask(Rng& rng, std::size_t max_h, std::size_t max_w) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_h)));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_w)));
    const double p = rng.uniform() < 0.1 ? (rng.bernoulli(0.5) ? 0.0 : 1.0) : rng.uniform(0.02, 0.6);
    return random_mask(rng, h, w, p);
}

/// 3x3 mask from the 9 bits of `bits` (bit y*3+x).
inline BinaryMask mask3x3(unsigned bits) {
    BinaryMask m(3, 3);
    for (std::size_t i = 0; i < 9; ++i) m.set(i / 3, i % 3, (bits >> i) & 1u);
    return m;
}

/// Crack pixels with at least one 8-neighbour crack pixel are kept.
inline BinaryMask without_isolated(const BinaryMask& m) {
    BinaryMask out(m.height(), m.width());
    for (std::size_t y = 0; y < m.height(); ++y)
        for (std::size_t x = 0; x < m.width(); ++x) {
            if (!m(y, x)) continue;
            bool neighbour = false;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx)
                    if ((dy || dx) && m.get(static_cast<long>(y) + dy, static_cast<long>(x) + dx)) neighbour = true;
            out.set(y, x, neighbour);
        }
    return out;
}

struct BruteCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// O(n^2) all-pairs matching with the tolerance test done in integers.
inline BruteCounts brute_metrics(const BinaryMask& pred, const BinaryMask& gt, double tol) {
    std::vector<std::pair<long, long>> p, g;
    for (std::size_t y = 0; y < pred.height(); ++y)
        for (std::size_t x = 0; x < pred.width(); ++x) {
            if (pred(y, x)) p.emplace_back(y, x);
            if (gt(y, x)) g.emplace_back(y, x);
        }
    const double t2 = tol * tol;
    auto near = [&](const std::pair<long, long>& a, const std::vector<std::pair<long, long>>& set) {
        for (const auto& b : set) {
            const long dy = a.first - b.first, dx = a.second - b.second;
            if (static_cast<double>(dy * dy + dx * dx) <= t2) return true;
        }
        return false;
    };
    BruteCounts c;
    for (const auto& a : p) (near(a, g) ? c.tp : c.fp)++;
    for (const auto& b : g)
        if (!near(b, p)) c.fn++;
    return c;
}

/// Union-find over 8-connectivity; returns the partition as a set of sorted
/// pixel-index sets.
inline std::set<std::vector<std::size_t>> union_find_partition(const BinaryMask& m) {
    const std::size_t n = m.height() * m.width();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    const long h = static_cast<long>(m.height()), w = static_cast<long>(m.width());
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            if (!m.get(y, x)) continue;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx)
                    if (m.get(y + dy, x + dx)) {
                        const auto a = find(static_cast<std::size_t>(y * w + x));
                        const auto b = find(static_cast<std::size_t>((y + dy) * w + (x + dx)));
                        if (a != b) parent[a] = b;
                    }
        }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i)
        if (m.values()[i]) groups[find(i)].push_back(i);
    std::set<std::vector<std::size_t>> out;
    for (auto& [root, pixels] : groups) out.insert(pixels);
    return out;
}

inline conncrack::nn::Tensor<double> random_tensor(Rng& rng, conncrack::nn::Shape shape, double scale = 1.0) {
    conncrack::nn::Tensor<double> t(std::move(shape));
    for (auto& v : t.storage()) v = rng.uniform(-scale, scale);
    return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("conncrack_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testsupport
