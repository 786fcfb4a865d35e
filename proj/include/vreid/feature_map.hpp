#ifndef VREID_FEATURE_MAP_HPP
#define VREID_FEATURE_MAP_HPP

#include <cstddef>
#include <vector>

#include "vreid/matrix.hpp"
#include "vreid/rng.hpp"

namespace vreid {

// Dense 3-D array indexed (channel, height, width), row-major in w.
struct FeatureMap {
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> data; // c*h*w

    FeatureMap() = default;
    FeatureMap(std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(c_ * h_ * w_, fill) {}

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * h + j) * w + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * h + j) * w + k];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const FeatureMap& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline FeatureMap random_feature_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
    FeatureMap m(c, h, w);
    for (auto& v : m.data) v = rng.normal();
    return m;
}

// per-channel mean over all spatial positions
inline std::vector<double> global_avg_pool(const FeatureMap& x) {
    std::vector<double> out(x.c, 0.0);
    for (std::size_t i = 0; i < x.c; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k)
                s += x.at(i, j, k);
        out[i] = s / double(x.h * x.w);
    }
    return out;
}

} // namespace vreid

#endif // VREID_FEATURE_MAP_HPP
