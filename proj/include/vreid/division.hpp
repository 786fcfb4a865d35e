#ifndef VREID_DIVISION_HPP
#define VREID_DIVISION_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/feature_map.hpp"
#include "vreid/matrix.hpp"

namespace vreid {

enum class Axis { height, width, channel };

struct TooManyParts : std::runtime_error {
    TooManyParts(std::size_t parts, std::size_t extent)
        : std::runtime_error("cannot cut " + std::to_string(extent) + " positions into " +
                             std::to_string(parts) + " parts") {}
};

struct PartSet {
    Axis axis = Axis::height;
    std::vector<FeatureMap> parts;
};

namespace detail {

// contiguous split of `extent` into n near-equal pieces, remainder on the
// leading parts; returns (offset, length) per part
inline std::vector<std::pair<std::size_t, std::size_t>> split_extent(std::size_t extent,
                                                                     std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t base = extent / n;
    std::size_t rem = extent % n;
    std::size_t off = 0;
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t len = base + (r < rem ? 1 : 0);
        spans.emplace_back(off, len);
        off += len;
    }
    return spans;
}

} // namespace detail

inline PartSet divide(const FeatureMap& x, Axis axis, std::size_t n_parts) {
    std::size_t extent = axis == Axis::height ? x.h : axis == Axis::width ? x.w : x.c;
    if (n_parts == 0 || n_parts > extent) throw TooManyParts(n_parts, extent);

    PartSet set;
    set.axis = axis;
    for (auto [off, len] : detail::split_extent(extent, n_parts)) {
        FeatureMap part(axis == Axis::channel ? len : x.c,
                        axis == Axis::height ? len : x.h,
                        axis == Axis::width ? len : x.w);
        for (std::size_t i = 0; i < part.c; ++i)
            for (std::size_t j = 0; j < part.h; ++j)
                for (std::size_t k = 0; k < part.w; ++k) {
                    std::size_t si = axis == Axis::channel ? i + off : i;
                    std::size_t sj = axis == Axis::height ? j + off : j;
                    std::size_t sk = axis == Axis::width ? k + off : k;
                    part.at(i, j, k) = x.at(si, sj, sk);
                }
        set.parts.push_back(std::move(part));
    }
    return set;
}

// inverse of divide along the same axis
inline FeatureMap concat_parts(const PartSet& set) {
    if (set.parts.empty()) return {};
    const FeatureMap& first = set.parts.front();
    std::size_t total = 0;
    for (const auto& p : set.parts)
        total += set.axis == Axis::height ? p.h : set.axis == Axis::width ? p.w : p.c;

    FeatureMap out(set.axis == Axis::channel ? total : first.c,
                   set.axis == Axis::height ? total : first.h,
                   set.axis == Axis::width ? total : first.w);
    std::size_t off = 0;
    for (const auto& p : set.parts) {
        for (std::size_t i = 0; i < p.c; ++i)
            for (std::size_t j = 0; j < p.h; ++j)
                for (std::size_t k = 0; k < p.w; ++k) {
                    std::size_t di = set.axis == Axis::channel ? i + off : i;
                    std::size_t dj = set.axis == Axis::height ? j + off : j;
                    std::size_t dk = set.axis == Axis::width ? k + off : k;
                    out.at(di, dj, dk) = p.at(i, j, k);
                }
        off += set.axis == Axis::height ? p.h : set.axis == Axis::width ? p.w : p.c;
    }
    return out;
}

// Row r is the per-channel spatial mean of part r: length C for height and
// width cuts, and the part's own channel count for channel cuts (rows can be
// ragged when the channel count does not divide evenly).
inline std::vector<std::vector<double>> pool_parts(const PartSet& set) {
    std::vector<std::vector<double>> pooled;
    pooled.reserve(set.parts.size());
    for (const auto& p : set.parts) pooled.push_back(global_avg_pool(p));
    return pooled;
}

// Optional stand-in for the per-part embedding layers: one linear map per
// pooled row. Empty matrices pass the row through unchanged.
inline std::vector<std::vector<double>> project_parts(const std::vector<std::vector<double>>& pooled,
                                                      const std::vector<Matrix>& maps) {
    if (maps.size() != pooled.size())
        throw ShapeMismatch("one projection per part required");
    std::vector<std::vector<double>> out;
    out.reserve(pooled.size());
    for (std::size_t r = 0; r < pooled.size(); ++r)
        out.push_back(maps[r].data.empty() ? pooled[r] : matvec(maps[r], pooled[r]));
    return out;
}

// Fixed concatenation order: coarse, f1, then every pooled row of every part
// matrix in the order given. With normalize_blocks each constituent block
// (coarse, f1, each part row) is scaled to unit L2 norm; zero blocks stay zero.
inline std::vector<double> assemble_embedding(
    const std::vector<double>& coarse, const std::vector<double>& f1,
    const std::vector<std::vector<std::vector<double>>>& parts, bool normalize_blocks = false) {
    auto push_block = [&](std::vector<double>& dst, const std::vector<double>& block) {
        if (!normalize_blocks) {
            dst.insert(dst.end(), block.begin(), block.end());
            return;
        }
        double norm = 0.0;
        for (double v : block) norm += v * v;
        norm = std::sqrt(norm);
        for (double v : block) dst.push_back(norm > 0.0 ? v / norm : v);
    };

    std::vector<double> out;
    push_block(out, coarse);
    push_block(out, f1);
    for (const auto& matrix : parts)
        for (const auto& row : matrix)
            push_block(out, row);
    return out;
}

// Per-dimension affine standardization separating the metric-space view of an
// embedding from the classifier-space view. Statistics come from a training
// matrix; variance gets a small floor so constant dimensions stay finite.
struct BnNeck {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static BnNeck fit(const Matrix& train, double eps = 1e-5) {
        BnNeck bn;
        bn.mean.assign(train.cols, 0.0);
        bn.inv_std.assign(train.cols, 0.0);
        for (std::size_t j = 0; j < train.cols; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < train.rows; ++i) m += train(i, j);
            m /= double(train.rows);
            double var = 0.0;
            for (std::size_t i = 0; i < train.rows; ++i) {
                double d = train(i, j) - m;
                var += d * d;
            }
            var /= double(train.rows);
            bn.mean[j] = m;
            bn.inv_std[j] = 1.0 / std::sqrt(var + eps);
        }
        return bn;
    }

    std::vector<double> apply(const std::vector<double>& v) const {
        if (v.size() != mean.size()) throw ShapeMismatch("BnNeck dimension mismatch");
        std::vector<double> out(v.size());
        for (std::size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - mean[j]) * inv_std[j];
        return out;
    }

    Matrix apply(const Matrix& m) const {
        if (m.cols != mean.size()) throw ShapeMismatch("BnNeck dimension mismatch");
        Matrix out(m.rows, m.cols);
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                out(i, j) = (m(i, j) - mean[j]) * inv_std[j];
        return out;
    }
};

} // namespace vreid

#endif // VREID_DIVISION_HPP
