#ifndef VREID_TYPES_HPP
#define VREID_TYPES_HPP

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vreid {

// One image's identity label, camera, capture time and embedding vector.
// Embeddings are stored as float32 so feature files round-trip bit-exactly.
struct FeatureRecord {
    std::string image_id;
    std::string vehicle_id;
    std::string camera_id;
    double timestamp_s = 0.0;
    std::vector<float> embedding;
};

struct Dataset {
    std::vector<FeatureRecord> records;
    std::size_t dim = 0;
};

struct MissingCameraDistance : std::runtime_error {
    MissingCameraDistance(const std::string& a, const std::string& b)
        : std::runtime_error("no camera distance for pair (" + a + ", " + b + ")") {}
};

// Pairwise shortest road distances between cameras, symmetric by
// construction. Self-distance is 0; everything else must be positive.
class CameraGraph {
public:
    void set_distance(const std::string& a, const std::string& b, double meters) {
        cameras_.insert(a);
        cameras_.insert(b);
        if (a == b) return;
        dist_[key(a, b)] = meters;
    }

    bool has_distance(const std::string& a, const std::string& b) const {
        return a == b || dist_.count(key(a, b)) > 0;
    }

    double distance(const std::string& a, const std::string& b) const {
        if (a == b) return 0.0;
        auto it = dist_.find(key(a, b));
        if (it == dist_.end()) throw MissingCameraDistance(a, b);
        return it->second;
    }

    const std::set<std::string>& cameras() const { return cameras_; }
    const std::map<std::pair<std::string, std::string>, double>& pairs() const { return dist_; }

private:
    static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    std::set<std::string> cameras_;
    std::map<std::pair<std::string, std::string>, double> dist_;
};

enum class AttentionOrder { channel_then_spatial, spatial_then_channel, parallel };

// Engine-wide hyperparameters with their stock defaults.
struct EngineConfig {
    double lambda = 0.4;      // triplet loss weight
    double epsilon = 0.1;     // label smoothing
    double margin = 1.2;      // triplet margin
    double omega = 0.2;       // spatio-temporal fusion weight
    double alpha1 = 6.0;      // spatial affinity slope
    double alpha2 = 0.5;      // spatial affinity offset
    double beta1 = 6.0;       // temporal affinity slope
    double beta2 = 0.5;       // temporal affinity offset
    std::uint32_t reduction_ratio = 16;
    std::uint32_t spatial_kernel = 7;
    std::uint32_t parts_h = 2;
    std::uint32_t parts_w = 2;
    std::uint32_t parts_c = 2;
    std::uint64_t seed = 0;
};

} // namespace vreid

#endif // VREID_TYPES_HPP
