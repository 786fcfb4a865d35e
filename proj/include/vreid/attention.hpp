#ifndef VREID_ATTENTION_HPP
#define VREID_ATTENTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "vreid/feature_map.hpp"
#include "vreid/io.hpp"
#include "vreid/matrix.hpp"
#include "vreid/rng.hpp"
#include "vreid/types.hpp"

namespace vreid {

// Shared-MLP weights for the channel gate. The hidden width is ceil(C/k),
// which reduces to C/k when the reduction ratio divides C.
struct ChannelAttentionWeights {
    Matrix w1; // hidden x C
    Matrix w2; // C x hidden
    std::uint32_t reduction = 16;

    std::size_t channels() const { return w1.cols; }
    std::size_t hidden() const { return w1.rows; }
};

// Single conv layer mapping the 2-channel pooled stack to one plane.
// kernel laid out (input channel, dy, dx); size must be odd so symmetric
// zero padding preserves the spatial dims.
struct SpatialAttentionWeights {
    std::vector<double> kernel; // 2 * s * s
    std::uint32_t size = 7;

    double at(std::size_t ci, std::size_t dy, std::size_t dx) const {
        return kernel[(ci * size + dy) * size + dx];
    }
};

inline std::size_t hidden_width(std::size_t channels, std::uint32_t reduction) {
    return (channels + reduction - 1) / reduction;
}

inline ChannelAttentionWeights random_channel_weights(std::size_t channels,
                                                      std::uint32_t reduction, Rng& rng) {
    ChannelAttentionWeights w;
    w.reduction = reduction;
    std::size_t hid = hidden_width(channels, reduction);
    w.w1 = Matrix(hid, channels);
    w.w2 = Matrix(channels, hid);
    double s1 = 1.0 / std::sqrt(double(channels));
    double s2 = 1.0 / std::sqrt(double(hid));
    for (auto& v : w.w1.data) v = s1 * rng.normal();
    for (auto& v : w.w2.data) v = s2 * rng.normal();
    return w;
}

inline SpatialAttentionWeights random_spatial_weights(std::uint32_t size, Rng& rng) {
    if (size == 0 || size % 2 == 0) throw ShapeMismatch("spatial kernel size must be odd");
    SpatialAttentionWeights w;
    w.size = size;
    w.kernel.resize(2 * std::size_t(size) * size);
    double s = 1.0 / std::sqrt(double(2 * size * size));
    for (auto& v : w.kernel) v = s * rng.normal();
    return w;
}

namespace detail {

// Pre-activations are clamped to +-35 so gates stay strictly inside (0,1)
// in double precision: sigmoid(35) = 1 - 6.3e-16 < 1.
inline double gate_sigmoid(double z) {
    z = std::clamp(z, -35.0, 35.0);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

} // namespace detail

struct ChannelPools {
    std::vector<double> avg; // length C
    std::vector<double> max; // length C
};

inline ChannelPools channel_pool(const FeatureMap& x) {
    ChannelPools p;
    p.avg.resize(x.c);
    p.max.resize(x.c);
    for (std::size_t i = 0; i < x.c; ++i) {
        double s = 0.0;
        double m = x.at(i, 0, 0);
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k) {
                double v = x.at(i, j, k);
                s += v;
                if (v > m) m = v;
            }
        p.avg[i] = s / double(x.h * x.w);
        p.max[i] = m;
    }
    return p;
}

// sigmoid(W2 relu(W1 avg) + W2 relu(W1 max)), one gate per channel
inline std::vector<double> channel_attention(const FeatureMap& x,
                                             const ChannelAttentionWeights& w) {
    if (w.w1.cols != x.c || w.w2.rows != x.c || w.w1.rows != w.w2.cols)
        throw ShapeMismatch("channel attention weights do not match map channels");
    ChannelPools p = channel_pool(x);

    std::vector<double> ha = matvec(w.w1, p.avg);
    std::vector<double> hm = matvec(w.w1, p.max);
    for (auto& v : ha) v = detail::relu(v);
    for (auto& v : hm) v = detail::relu(v);
    std::vector<double> za = matvec(w.w2, ha);
    std::vector<double> zm = matvec(w.w2, hm);

    std::vector<double> gate(x.c);
    for (std::size_t i = 0; i < x.c; ++i)
        gate[i] = detail::gate_sigmoid(za[i] + zm[i]);
    return gate;
}

inline FeatureMap apply_channel_gate(const FeatureMap& x, const std::vector<double>& gate) {
    if (gate.size() != x.c) throw ShapeMismatch("channel gate length != C");
    FeatureMap out(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.c; ++i)
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k)
                out.at(i, j, k) = gate[i] * x.at(i, j, k);
    return out;
}

// plane 0 = max over channels, plane 1 = mean over channels
inline FeatureMap spatial_pool(const FeatureMap& x) {
    FeatureMap out(2, x.h, x.w);
    for (std::size_t j = 0; j < x.h; ++j)
        for (std::size_t k = 0; k < x.w; ++k) {
            double m = x.at(0, j, k);
            double s = 0.0;
            for (std::size_t i = 0; i < x.c; ++i) {
                double v = x.at(i, j, k);
                s += v;
                if (v > m) m = v;
            }
            out.at(0, j, k) = m;
            out.at(1, j, k) = s / double(x.c);
        }
    return out;
}

// sigmoid of a bias-free 2->1 convolution over the pooled stack, symmetric
// zero padding (s-1)/2; returns a (1, H, W) gate map
inline FeatureMap spatial_attention(const FeatureMap& x, const SpatialAttentionWeights& w) {
    if (w.size == 0 || w.size % 2 == 0) throw ShapeMismatch("spatial kernel size must be odd");
    if (w.kernel.size() != 2 * std::size_t(w.size) * w.size)
        throw ShapeMismatch("spatial kernel buffer has wrong length");

    FeatureMap pooled = spatial_pool(x);
    std::size_t pad = (w.size - 1) / 2;
    FeatureMap gate(1, x.h, x.w);
    for (std::size_t j = 0; j < x.h; ++j)
        for (std::size_t k = 0; k < x.w; ++k) {
            double z = 0.0;
            for (std::size_t ci = 0; ci < 2; ++ci)
                for (std::size_t dy = 0; dy < w.size; ++dy)
                    for (std::size_t dx = 0; dx < w.size; ++dx) {
                        std::ptrdiff_t jj = std::ptrdiff_t(j + dy) - std::ptrdiff_t(pad);
                        std::ptrdiff_t kk = std::ptrdiff_t(k + dx) - std::ptrdiff_t(pad);
                        if (jj < 0 || kk < 0 || jj >= std::ptrdiff_t(x.h) ||
                            kk >= std::ptrdiff_t(x.w))
                            continue;
                        z += w.at(ci, dy, dx) *
                             pooled.at(ci, std::size_t(jj), std::size_t(kk));
                    }
            gate.at(0, j, k) = detail::gate_sigmoid(z);
        }
    return gate;
}

inline FeatureMap apply_spatial_gate(const FeatureMap& x, const FeatureMap& gate) {
    if (gate.c != 1 || gate.h != x.h || gate.w != x.w)
        throw ShapeMismatch("spatial gate must be (1, H, W)");
    FeatureMap out(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.c; ++i)
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k)
                out.at(i, j, k) = gate.at(0, j, k) * x.at(i, j, k);
    return out;
}

// Full attention pass. Sequential orders recompute the second gate from the
// intermediate map; parallel computes both gates from the input and applies
// their product.
inline FeatureMap attention_block(const FeatureMap& x, const ChannelAttentionWeights& cw,
                                  const SpatialAttentionWeights& sw, AttentionOrder order) {
    switch (order) {
    case AttentionOrder::channel_then_spatial: {
        FeatureMap x1 = apply_channel_gate(x, channel_attention(x, cw));
        return apply_spatial_gate(x1, spatial_attention(x1, sw));
    }
    case AttentionOrder::spatial_then_channel: {
        FeatureMap x1 = apply_spatial_gate(x, spatial_attention(x, sw));
        return apply_channel_gate(x1, channel_attention(x1, cw));
    }
    case AttentionOrder::parallel: {
        std::vector<double> gc = channel_attention(x, cw);
        FeatureMap gs = spatial_attention(x, sw);
        FeatureMap out(x.c, x.h, x.w);
        for (std::size_t i = 0; i < x.c; ++i)
            for (std::size_t j = 0; j < x.h; ++j)
                for (std::size_t k = 0; k < x.w; ++k)
                    out.at(i, j, k) = gc[i] * gs.at(0, j, k) * x.at(i, j, k);
        return out;
    }
    }
    throw ShapeMismatch("unknown attention order");
}

inline AttentionOrder attention_order_from_string(const std::string& s) {
    if (s == "channel-spatial") return AttentionOrder::channel_then_spatial;
    if (s == "spatial-channel") return AttentionOrder::spatial_then_channel;
    if (s == "parallel") return AttentionOrder::parallel;
    throw BadConfigValue("unknown attention order '" + s + "'");
}

inline std::string to_string(AttentionOrder o) {
    switch (o) {
    case AttentionOrder::channel_then_spatial: return "channel-spatial";
    case AttentionOrder::spatial_then_channel: return "spatial-channel";
    case AttentionOrder::parallel: return "parallel";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// weight persistence: feature-file container + one-line shape sidecar

struct AttentionWeights {
    ChannelAttentionWeights channel;
    SpatialAttentionWeights spatial;
};

inline void save_attention_weights(const std::string& bin_path, const std::string& sidecar_path,
                                   const AttentionWeights& w) {
    FeatureMatrix fm;
    fm.n = 1;
    fm.d = std::uint32_t(w.channel.w1.data.size() + w.channel.w2.data.size() +
                         w.spatial.kernel.size());
    fm.values.reserve(fm.d);
    for (double v : w.channel.w1.data) fm.values.push_back(float(v));
    for (double v : w.channel.w2.data) fm.values.push_back(float(v));
    for (double v : w.spatial.kernel) fm.values.push_back(float(v));
    write_features(bin_path, fm);

    std::ofstream out(sidecar_path);
    if (!out) throw IoError("cannot write '" + sidecar_path + "'");
    out << "C=" << w.channel.channels() << " k=" << w.channel.reduction
        << " s=" << w.spatial.size << "\n";
}

inline AttentionWeights load_attention_weights(const std::string& bin_path,
                                               const std::string& sidecar_path) {
    auto lines = detail::read_lines(sidecar_path);
    if (lines.empty()) throw MalformedHeader("empty weight sidecar");
    std::size_t channels = 0, reduction = 0, ksize = 0;
    if (std::sscanf(lines[0].c_str(), "C=%zu k=%zu s=%zu", &channels, &reduction, &ksize) != 3)
        throw MalformedHeader(lines[0]);
    if (channels == 0 || reduction == 0 || ksize == 0 || ksize % 2 == 0)
        throw BadConfigValue("bad shapes in weight sidecar");

    FeatureMatrix fm = parse_features(bin_path);
    std::size_t hid = hidden_width(channels, std::uint32_t(reduction));
    std::size_t need = hid * channels * 2 + 2 * ksize * ksize;
    if (fm.values.size() != need)
        throw CountMismatch("weight file holds " + std::to_string(fm.values.size()) +
                            " values, shapes need " + std::to_string(need));

    AttentionWeights w;
    w.channel.reduction = std::uint32_t(reduction);
    w.channel.w1 = Matrix(hid, channels);
    w.channel.w2 = Matrix(channels, hid);
    w.spatial.size = std::uint32_t(ksize);
    w.spatial.kernel.resize(2 * ksize * ksize);
    std::size_t pos = 0;
    for (auto& v : w.channel.w1.data) v = fm.values[pos++];
    for (auto& v : w.channel.w2.data) v = fm.values[pos++];
    for (auto& v : w.spatial.kernel) v = fm.values[pos++];
    return w;
}

} // namespace vreid

#endif // VREID_ATTENTION_HPP
