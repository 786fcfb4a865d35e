#ifndef VREID_PIPELINE_HPP
#define VREID_PIPELINE_HPP

#include <cmath>
#include <vector>

#include "vreid/attention.hpp"
#include "vreid/division.hpp"
#include "vreid/feature_map.hpp"
#include "vreid/matrix.hpp"
#include "vreid/rng.hpp"
#include "vreid/types.hpp"

namespace vreid {

struct AppearanceConfig {
    std::size_t parts_h = 2;
    std::size_t parts_w = 2;
    std::size_t parts_c = 2;
    AttentionOrder order = AttentionOrder::channel_then_spatial;
    bool normalize_blocks = false;
};

// Two-stream appearance embedding of one feature map: a coarse global
// average, an attended global average, and attended part poolings along the
// height, width and channel axes, concatenated in that order.
inline std::vector<double> appearance_embedding(const FeatureMap& x,
                                                const ChannelAttentionWeights& cw,
                                                const SpatialAttentionWeights& sw,
                                                const AppearanceConfig& cfg) {
    std::vector<double> coarse = global_avg_pool(x);
    FeatureMap attended = attention_block(x, cw, sw, cfg.order);
    std::vector<double> f1 = global_avg_pool(attended);
    auto ph = pool_parts(divide(attended, Axis::height, cfg.parts_h));
    auto pw = pool_parts(divide(attended, Axis::width, cfg.parts_w));
    auto pc = pool_parts(divide(attended, Axis::channel, cfg.parts_c));
    return assemble_embedding(coarse, f1, {ph, pw, pc}, cfg.normalize_blocks);
}

// Seeded Gaussian lift used to drive the map-level pipeline from flat
// embeddings: one shared (c*h*w x d) projection keeps neighborhood structure
// in expectation.
inline Matrix make_lift(std::size_t dim, std::size_t c, std::size_t h, std::size_t w,
                        std::uint64_t seed) {
    Rng rng(seed);
    Matrix lift(c * h * w, dim);
    double scale = 1.0 / std::sqrt(double(dim));
    for (auto& v : lift.data) v = scale * rng.normal();
    return lift;
}

inline FeatureMap lift_to_map(const std::vector<float>& embedding, const Matrix& lift,
                              std::size_t c, std::size_t h, std::size_t w) {
    if (lift.rows != c * h * w || lift.cols != embedding.size())
        throw ShapeMismatch("lift matrix does not match embedding / map dims");
    FeatureMap out(c, h, w);
    for (std::size_t r = 0; r < lift.rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < lift.cols; ++j) s += lift(r, j) * embedding[j];
        out.data[r] = s;
    }
    return out;
}

inline std::vector<std::vector<double>> embed_dataset_maps(const Dataset& ds, const Matrix& lift,
                                                           std::size_t c, std::size_t h,
                                                           std::size_t w,
                                                           const AttentionWeights& weights,
                                                           const AppearanceConfig& cfg) {
    std::vector<std::vector<double>> out;
    out.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
        FeatureMap map = lift_to_map(rec.embedding, lift, c, h, w);
        out.push_back(appearance_embedding(map, weights.channel, weights.spatial, cfg));
    }
    return out;
}

} // namespace vreid

#endif // VREID_PIPELINE_HPP
