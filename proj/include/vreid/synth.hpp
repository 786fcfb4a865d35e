#ifndef VREID_SYNTH_HPP
#define VREID_SYNTH_HPP

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/io.hpp"
#include "vreid/rng.hpp"
#include "vreid/spatiotemporal.hpp"
#include "vreid/types.hpp"

namespace vreid {

// Camera-network simulator settings. Cameras sit on a ring road whose edge
// lengths follow the distance distribution; identities hop between adjacent
// cameras with log-normal time gaps, so consecutive same-identity sightings
// carry informative spatio-temporal structure while unrelated pairs spread
// across the whole network and time horizon.
struct SynthConfig {
    std::size_t n_identities = 50;
    std::size_t cameras = 6;
    std::size_t sightings_per_identity = 8;
    std::size_t embedding_dim = 32;
    double cluster_spread = 0.1;
    LogNormalParams true_dist_params{std::log(500.0), 0.4}; // ring edge lengths, meters
    LogNormalParams true_time_params{std::log(300.0), 0.5}; // transit times, seconds
    double time_horizon = 15000.0; // trajectory start times drawn from [0, horizon)
    double noise_fraction = 0.0;
    std::uint64_t seed = 42;
};

struct SynthData {
    Dataset dataset;
    CameraGraph graph;
    STModel truth;
    std::size_t planted_transitions = 0; // consecutive cross-camera hops
};

namespace detail {

inline std::string padded_id(const char* prefix, std::size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, n);
    return buf;
}

// replaces the chosen records' embeddings with unit-scale Gaussian noise
inline void corrupt_in_place(Dataset& ds, double fraction, Rng& rng) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("corruption fraction must be in [0,1]");
    std::size_t n = ds.records.size();
    std::size_t count = std::size_t(std::llround(fraction * double(n)));

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);

    for (std::size_t i = 0; i < count; ++i)
        for (auto& v : ds.records[idx[i]].embedding) v = float(rng.normal());
}

} // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
    if (cfg.n_identities == 0 || cfg.cameras == 0 || cfg.sightings_per_identity == 0 ||
        cfg.embedding_dim == 0)
        throw std::invalid_argument("all synthetic counts must be at least 1");
    if (cfg.cluster_spread < 0.0) throw std::invalid_argument("cluster_spread must be >= 0");
    if (cfg.time_horizon <= 0.0) throw std::invalid_argument("time_horizon must be positive");
    if (cfg.noise_fraction < 0.0 || cfg.noise_fraction > 1.0)
        throw std::invalid_argument("noise_fraction must be in [0,1]");

    Rng rng(cfg.seed);
    SynthData out;
    out.truth.dist_params = cfg.true_dist_params;
    out.truth.time_params = cfg.true_time_params;

    std::vector<std::string> cam_ids;
    for (std::size_t c = 0; c < cfg.cameras; ++c)
        cam_ids.push_back(detail::padded_id("cam", c + 1, 2));

    // ring road: edge lengths are log-normal, pairwise distance is the
    // shorter way around
    std::vector<double> edges(cfg.cameras, 0.0);
    for (auto& e : edges) e = rng.log_normal(cfg.true_dist_params.mu, cfg.true_dist_params.sigma);
    double ring_total = 0.0;
    std::vector<double> prefix(cfg.cameras + 1, 0.0); // distance from camera 0 going up
    for (std::size_t c = 0; c < cfg.cameras; ++c) {
        prefix[c + 1] = prefix[c] + edges[c];
        ring_total += edges[c];
    }
    for (std::size_t a = 0; a < cfg.cameras; ++a)
        for (std::size_t b = a + 1; b < cfg.cameras; ++b) {
            double up = prefix[b] - prefix[a];
            out.graph.set_distance(cam_ids[a], cam_ids[b], std::min(up, ring_total - up));
        }
    if (cfg.cameras == 1) out.graph.set_distance(cam_ids[0], cam_ids[0], 0.0);

    out.dataset.dim = cfg.embedding_dim;
    std::size_t image_no = 0;
    for (std::size_t v = 0; v < cfg.n_identities; ++v) {
        std::vector<double> centroid(cfg.embedding_dim);
        for (auto& c : centroid) c = rng.normal();

        std::size_t cam = rng.index(cfg.cameras);
        double t = rng.uniform(0.0, cfg.time_horizon);
        for (std::size_t s = 0; s < cfg.sightings_per_identity; ++s) {
            if (s > 0) {
                if (cfg.cameras > 1) {
                    // hop to a ring-adjacent camera
                    bool up = cfg.cameras == 2 ? true : rng.uniform() < 0.5;
                    cam = up ? (cam + 1) % cfg.cameras : (cam + cfg.cameras - 1) % cfg.cameras;
                    ++out.planted_transitions;
                }
                t += rng.log_normal(cfg.true_time_params.mu, cfg.true_time_params.sigma);
            }
            FeatureRecord rec;
            rec.image_id = detail::padded_id("img", ++image_no, 6);
            rec.vehicle_id = detail::padded_id("v", v + 1, 4);
            rec.camera_id = cam_ids[cam];
            rec.timestamp_s = t;
            rec.embedding.resize(cfg.embedding_dim);
            for (std::size_t d = 0; d < cfg.embedding_dim; ++d)
                rec.embedding[d] = float(centroid[d] + cfg.cluster_spread * rng.normal());
            out.dataset.records.push_back(std::move(rec));
        }
    }

    if (cfg.noise_fraction > 0.0)
        detail::corrupt_in_place(out.dataset, cfg.noise_fraction, rng);
    return out;
}

// seeded copy with round(fraction * n) embeddings replaced by noise
inline Dataset corrupt(const Dataset& ds, double fraction, std::uint64_t seed) {
    Dataset out = ds;
    Rng rng(seed);
    detail::corrupt_in_place(out, fraction, rng);
    return out;
}

inline void write_synth_dir(const std::string& dir, const SynthData& data) {
    write_metadata(dir + "/meta.csv", data.dataset.records);
    write_features(dir + "/features.bin", to_feature_matrix(data.dataset));
    write_camera_graph(dir + "/cameras.csv", data.graph);
    save_st_model(dir + "/truth.txt", data.truth);
}

} // namespace vreid

#endif // VREID_SYNTH_HPP
