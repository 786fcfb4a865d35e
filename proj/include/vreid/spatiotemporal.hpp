#ifndef VREID_SPATIOTEMPORAL_HPP
#define VREID_SPATIOTEMPORAL_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/io.hpp"
#include "vreid/types.hpp"

namespace vreid {

struct NonPositiveInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPositiveSample : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateSample : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoPositivePairs : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LogNormalParams {
    double mu = 0.0;
    double sigma = 1.0;
};

// Fitted transit statistics plus the affinity shape/offset parameters and
// the fusion weight.
struct STModel {
    LogNormalParams dist_params; // camera distance delta, meters
    LogNormalParams time_params; // time interval tau, seconds
    double alpha1 = 6.0;
    double alpha2 = 0.5;
    double beta1 = 6.0;
    double beta2 = 0.5;
    double omega = 0.2;
};

inline double log_normal_pdf(double x, const LogNormalParams& p) {
    if (x <= 0.0) throw NonPositiveInput("log-normal density requires x > 0");
    double z = (std::log(x) - p.mu) / p.sigma;
    return std::exp(-0.5 * z * z) / (x * p.sigma * std::sqrt(2.0 * M_PI));
}

// Closed-form MLE: mu is the mean of the log samples, sigma the (biased,
// 1/n) root mean squared deviation of the logs.
inline LogNormalParams fit_log_normal(const std::vector<double>& samples) {
    if (samples.size() < 2) throw DegenerateSample("need at least 2 samples");
    for (double s : samples)
        if (s <= 0.0) throw NonPositiveSample("log-normal samples must be positive");

    double mu = 0.0;
    for (double s : samples) mu += std::log(s);
    mu /= double(samples.size());

    double var = 0.0;
    for (double s : samples) {
        double d = std::log(s) - mu;
        var += d * d;
    }
    var /= double(samples.size());
    if (var <= 0.0) throw DegenerateSample("all samples equal");
    return {mu, std::sqrt(var)};
}

struct StSamples {
    std::vector<double> deltas; // meters
    std::vector<double> taus;   // seconds
};

// Transit observations: per identity, sightings sorted by time (ties by
// image_id), then each consecutive cross-camera pair contributes the pair's
// camera distance and absolute time gap. Zero values fall outside log-normal
// support and are excluded.
inline StSamples collect_st_samples(const Dataset& ds, const CameraGraph& graph) {
    std::map<std::string, std::vector<const FeatureRecord*>> by_vehicle;
    for (const auto& r : ds.records) by_vehicle[r.vehicle_id].push_back(&r);

    StSamples out;
    for (auto& [vid, sightings] : by_vehicle) {
        std::sort(sightings.begin(), sightings.end(),
                  [](const FeatureRecord* a, const FeatureRecord* b) {
                      if (a->timestamp_s != b->timestamp_s) return a->timestamp_s < b->timestamp_s;
                      return a->image_id < b->image_id;
                  });
        for (std::size_t i = 1; i < sightings.size(); ++i) {
            const FeatureRecord* prev = sightings[i - 1];
            const FeatureRecord* cur = sightings[i];
            if (prev->camera_id == cur->camera_id) continue;
            double delta = graph.distance(prev->camera_id, cur->camera_id);
            double tau = std::abs(cur->timestamp_s - prev->timestamp_s);
            if (delta > 0.0) out.deltas.push_back(delta);
            if (tau > 0.0) out.taus.push_back(tau);
        }
    }
    if (out.deltas.empty() || out.taus.empty())
        throw NoPositivePairs("no same-identity cross-camera transitions with positive samples");
    return out;
}

// Common shape of Eq.-style affinities: a rising density pushes the value
// toward 0, so a plausible transition contributes little extra distance.
inline double affinity_from_density(double density, double slope, double offset) {
    return 1.0 / (1.0 + std::exp(slope * (density - offset)));
}

inline double spatial_affinity(double delta, const STModel& m) {
    if (delta <= 0.0) throw NonPositiveInput("spatial affinity requires delta > 0");
    return affinity_from_density(log_normal_pdf(delta, m.dist_params), m.alpha1, m.alpha2);
}

inline double temporal_affinity(double tau, const STModel& m) {
    if (tau <= 0.0) throw NonPositiveInput("temporal affinity requires tau > 0");
    return affinity_from_density(log_normal_pdf(tau, m.time_params), m.beta1, m.beta2);
}

// ---------------------------------------------------------------------------
// flat text persistence, 17 significant digits for exact round-trips

inline void save_st_model(const std::string& path, const STModel& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "mu_delta = " << fmt_g17(m.dist_params.mu) << "\n"
        << "sigma_delta = " << fmt_g17(m.dist_params.sigma) << "\n"
        << "mu_tau = " << fmt_g17(m.time_params.mu) << "\n"
        << "sigma_tau = " << fmt_g17(m.time_params.sigma) << "\n"
        << "alpha1 = " << fmt_g17(m.alpha1) << "\n"
        << "alpha2 = " << fmt_g17(m.alpha2) << "\n"
        << "beta1 = " << fmt_g17(m.beta1) << "\n"
        << "beta2 = " << fmt_g17(m.beta2) << "\n"
        << "omega = " << fmt_g17(m.omega) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline STModel load_st_model(const std::string& path) {
    STModel m;
    std::map<std::string, bool> seen;
    std::string key, value;
    for (const auto& line : detail::read_lines(path)) {
        if (!detail::split_kv(line, key, value)) continue;
        double v;
        if (!detail::parse_double(value, v) || !std::isfinite(v))
            throw BadConfigValue("bad value for '" + key + "': " + value);
        if (key == "mu_delta") m.dist_params.mu = v;
        else if (key == "sigma_delta") m.dist_params.sigma = v;
        else if (key == "mu_tau") m.time_params.mu = v;
        else if (key == "sigma_tau") m.time_params.sigma = v;
        else if (key == "alpha1") m.alpha1 = v;
        else if (key == "alpha2") m.alpha2 = v;
        else if (key == "beta1") m.beta1 = v;
        else if (key == "beta2") m.beta2 = v;
        else if (key == "omega") m.omega = v;
        else throw UnknownConfigKey(key);
        seen[key] = true;
    }
    for (const char* k : {"mu_delta", "sigma_delta", "mu_tau", "sigma_tau", "alpha1", "alpha2",
                          "beta1", "beta2", "omega"})
        if (!seen[k]) throw BadConfigValue(std::string("missing field '") + k + "'");
    if (m.dist_params.sigma <= 0.0 || m.time_params.sigma <= 0.0)
        throw BadConfigValue("sigma fields must be positive");
    return m;
}

} // namespace vreid

#endif // VREID_SPATIOTEMPORAL_HPP
