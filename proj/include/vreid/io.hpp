#ifndef VREID_IO_HPP
#define VREID_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/types.hpp"

namespace vreid {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedHeader : ParseError {
    explicit MalformedHeader(const std::string& got)
        : ParseError("malformed header: '" + got + "'") {}
};

struct MalformedRow : ParseError {
    MalformedRow(std::size_t line, const std::string& why)
        : ParseError("line " + std::to_string(line) + ": " + why) {}
};

struct BadTimestamp : ParseError {
    explicit BadTimestamp(std::size_t line)
        : ParseError("line " + std::to_string(line) + ": bad timestamp"), line(line) {}
    std::size_t line;
};

struct DuplicateImageId : ParseError {
    explicit DuplicateImageId(const std::string& id)
        : ParseError("duplicate image_id '" + id + "'"), id(id) {}
    std::string id;
};

struct EmptyDataset : ParseError {
    using ParseError::ParseError;
};

struct BadMagic : ParseError {
    using ParseError::ParseError;
};

struct TruncatedPayload : ParseError {
    using ParseError::ParseError;
};

struct NonFiniteValue : ParseError {
    NonFiniteValue(std::size_t row, std::size_t col)
        : ParseError("non-finite value at row " + std::to_string(row) + ", col " + std::to_string(col)),
          row(row), col(col) {}
    std::size_t row, col;
};

struct AsymmetricConflict : ParseError {
    AsymmetricConflict(const std::string& a, const std::string& b)
        : ParseError("conflicting distances for pair (" + a + ", " + b + ")") {}
};

struct NonPositiveDistance : ParseError {
    using ParseError::ParseError;
};

struct CountMismatch : ParseError {
    using ParseError::ParseError;
};

struct UnknownConfigKey : ParseError {
    explicit UnknownConfigKey(const std::string& key)
        : ParseError("unknown config key '" + key + "'") {}
};

struct BadConfigValue : ParseError {
    using ParseError::ParseError;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

} // namespace detail

// Doubles serialized with 17 significant digits parse back bit-exact.
inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline constexpr const char* kMetadataHeader = "image_id,vehicle_id,camera_id,timestamp_s";
inline constexpr const char* kCameraHeader = "camera_a,camera_b,distance_m";
inline constexpr const char* kFeatureMagic = "DFR1";

// ---------------------------------------------------------------------------
// metadata CSV

inline std::vector<FeatureRecord> parse_metadata(const std::string& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != kMetadataHeader)
        throw MalformedHeader(lines.empty() ? "" : lines[0]);

    std::vector<FeatureRecord> records;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        auto fields = detail::split_csv(lines[i]);
        if (fields.size() != 4)
            throw MalformedRow(i + 1, "expected 4 fields, got " + std::to_string(fields.size()));
        FeatureRecord rec;
        rec.image_id = fields[0];
        rec.vehicle_id = fields[1];
        rec.camera_id = fields[2];
        if (rec.image_id.empty() || rec.vehicle_id.empty() || rec.camera_id.empty())
            throw MalformedRow(i + 1, "empty field");
        double ts;
        if (!detail::parse_double(fields[3], ts) || !std::isfinite(ts) || ts < 0.0)
            throw BadTimestamp(i + 1);
        rec.timestamp_s = ts;
        if (!seen.insert(rec.image_id).second) throw DuplicateImageId(rec.image_id);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw EmptyDataset("metadata file has no data rows");
    return records;
}

inline void write_metadata(const std::string& path, const std::vector<FeatureRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kMetadataHeader << "\n";
    for (const auto& r : records)
        out << r.image_id << "," << r.vehicle_id << "," << r.camera_id << ","
            << fmt_g17(r.timestamp_s) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// feature file: "DFR1" | u32 n | u32 d | n*d little-endian float32, row-major

struct FeatureMatrix {
    std::uint32_t n = 0;
    std::uint32_t d = 0;
    std::vector<float> values; // n*d, row-major
};

namespace detail {

inline std::uint32_t u32_le(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline void put_u32_le(std::string& buf, std::uint32_t v) {
    buf.push_back(char(v & 0xff));
    buf.push_back(char((v >> 8) & 0xff));
    buf.push_back(char((v >> 16) & 0xff));
    buf.push_back(char((v >> 24) & 0xff));
}

inline float f32_le(const unsigned char* p) {
    std::uint32_t bits = u32_le(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

inline void put_f32_le(std::string& buf, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32_le(buf, bits);
}

} // namespace detail

inline FeatureMatrix parse_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 4 || bytes.compare(0, 4, kFeatureMagic) != 0)
        throw BadMagic("feature file does not start with DFR1");
    if (bytes.size() < 12) throw TruncatedPayload("feature file shorter than header");

    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    FeatureMatrix fm;
    fm.n = detail::u32_le(p + 4);
    fm.d = detail::u32_le(p + 8);

    std::size_t expected = 12 + std::size_t(4) * fm.n * fm.d;
    if (bytes.size() < expected)
        throw TruncatedPayload("payload holds fewer values than declared");
    if (bytes.size() > expected)
        throw TruncatedPayload("payload holds trailing bytes beyond declared size");

    fm.values.resize(std::size_t(fm.n) * fm.d);
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
        float v = detail::f32_le(p + 12 + 4 * i);
        if (!std::isfinite(v)) throw NonFiniteValue(i / fm.d, i % fm.d);
        fm.values[i] = v;
    }
    return fm;
}

inline void write_features(const std::string& path, const FeatureMatrix& fm) {
    std::string buf;
    buf.reserve(12 + 4 * fm.values.size());
    buf.append(kFeatureMagic);
    detail::put_u32_le(buf, fm.n);
    detail::put_u32_le(buf, fm.d);
    for (float v : fm.values) detail::put_f32_le(buf, v);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// camera graph CSV

inline CameraGraph parse_camera_graph(const std::string& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != kCameraHeader)
        throw MalformedHeader(lines.empty() ? "" : lines[0]);

    CameraGraph g;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        auto fields = detail::split_csv(lines[i]);
        if (fields.size() != 3)
            throw MalformedRow(i + 1, "expected 3 fields, got " + std::to_string(fields.size()));
        const std::string& a = fields[0];
        const std::string& b = fields[1];
        if (a.empty() || b.empty()) throw MalformedRow(i + 1, "empty camera id");
        if (a == b) throw MalformedRow(i + 1, "self distance rows are not allowed");
        double dist;
        if (!detail::parse_double(fields[2], dist) || !std::isfinite(dist))
            throw MalformedRow(i + 1, "bad distance value");
        if (dist <= 0.0)
            throw NonPositiveDistance("line " + std::to_string(i + 1) + ": distance must be positive");
        if (g.has_distance(a, b) && g.distance(a, b) != dist) throw AsymmetricConflict(a, b);
        g.set_distance(a, b, dist);
    }
    return g;
}

inline void write_camera_graph(const std::string& path, const CameraGraph& g) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kCameraHeader << "\n";
    for (const auto& [pair, meters] : g.pairs())
        out << pair.first << "," << pair.second << "," << fmt_g17(meters) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// dataset assembly

inline Dataset load_dataset(const std::string& meta_path, const std::string& features_path) {
    Dataset ds;
    ds.records = parse_metadata(meta_path);
    FeatureMatrix fm = parse_features(features_path);
    if (fm.n != ds.records.size())
        throw CountMismatch("metadata has " + std::to_string(ds.records.size()) +
                            " records but feature file holds " + std::to_string(fm.n) + " rows");
    if (fm.d == 0) throw EmptyDataset("feature file declares zero embedding dimension");
    ds.dim = fm.d;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        ds.records[i].embedding.assign(fm.values.begin() + std::ptrdiff_t(i * fm.d),
                                       fm.values.begin() + std::ptrdiff_t((i + 1) * fm.d));
    return ds;
}

inline FeatureMatrix to_feature_matrix(const Dataset& ds) {
    FeatureMatrix fm;
    fm.n = std::uint32_t(ds.records.size());
    fm.d = std::uint32_t(ds.dim);
    fm.values.reserve(std::size_t(fm.n) * fm.d);
    for (const auto& r : ds.records)
        fm.values.insert(fm.values.end(), r.embedding.begin(), r.embedding.end());
    return fm;
}

// ---------------------------------------------------------------------------
// key = value config text

namespace detail {

// Splits a "key = value" line; returns false for blank/comment lines.
inline bool split_kv(const std::string& line, std::string& key, std::string& value) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') return false;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw BadConfigValue("missing '=' in line: " + line);
    key = trim(t.substr(0, eq));
    value = trim(t.substr(eq + 1));
    if (key.empty()) throw BadConfigValue("empty key in line: " + line);
    return true;
}

} // namespace detail

inline EngineConfig parse_engine_config(const std::string& path) {
    EngineConfig cfg;
    std::string key, value;
    for (const auto& line : detail::read_lines(path)) {
        if (!detail::split_kv(line, key, value)) continue;
        double v;
        if (!detail::parse_double(value, v) || !std::isfinite(v))
            throw BadConfigValue("bad value for '" + key + "': " + value);
        if (key == "lambda") cfg.lambda = v;
        else if (key == "epsilon") cfg.epsilon = v;
        else if (key == "margin") cfg.margin = v;
        else if (key == "omega") cfg.omega = v;
        else if (key == "alpha1") cfg.alpha1 = v;
        else if (key == "alpha2") cfg.alpha2 = v;
        else if (key == "beta1") cfg.beta1 = v;
        else if (key == "beta2") cfg.beta2 = v;
        else if (key == "reduction_ratio") cfg.reduction_ratio = std::uint32_t(v);
        else if (key == "spatial_kernel") cfg.spatial_kernel = std::uint32_t(v);
        else if (key == "parts_h") cfg.parts_h = std::uint32_t(v);
        else if (key == "parts_w") cfg.parts_w = std::uint32_t(v);
        else if (key == "parts_c") cfg.parts_c = std::uint32_t(v);
        else if (key == "seed") cfg.seed = std::uint64_t(v);
        else throw UnknownConfigKey(key);
    }
    if (cfg.lambda < 0.0) throw BadConfigValue("lambda must be >= 0");
    if (cfg.epsilon < 0.0 || cfg.epsilon > 1.0) throw BadConfigValue("epsilon must be in [0,1]");
    if (cfg.margin < 0.0) throw BadConfigValue("margin must be >= 0");
    if (cfg.omega < 0.0) throw BadConfigValue("omega must be >= 0");
    if (cfg.reduction_ratio == 0) throw BadConfigValue("reduction_ratio must be positive");
    if (cfg.spatial_kernel == 0 || cfg.spatial_kernel % 2 == 0)
        throw BadConfigValue("spatial_kernel must be odd and positive");
    if (cfg.parts_h == 0 || cfg.parts_w == 0 || cfg.parts_c == 0)
        throw BadConfigValue("part counts must be positive");
    return cfg;
}

inline void write_engine_config(const std::string& path, const EngineConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "lambda = " << fmt_g17(cfg.lambda) << "\n"
        << "epsilon = " << fmt_g17(cfg.epsilon) << "\n"
        << "margin = " << fmt_g17(cfg.margin) << "\n"
        << "omega = " << fmt_g17(cfg.omega) << "\n"
        << "alpha1 = " << fmt_g17(cfg.alpha1) << "\n"
        << "alpha2 = " << fmt_g17(cfg.alpha2) << "\n"
        << "beta1 = " << fmt_g17(cfg.beta1) << "\n"
        << "beta2 = " << fmt_g17(cfg.beta2) << "\n"
        << "reduction_ratio = " << cfg.reduction_ratio << "\n"
        << "spatial_kernel = " << cfg.spatial_kernel << "\n"
        << "parts_h = " << cfg.parts_h << "\n"
        << "parts_w = " << cfg.parts_w << "\n"
        << "parts_c = " << cfg.parts_c << "\n"
        << "seed = " << cfg.seed << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

// One id per line; blank lines skipped.
inline std::vector<std::string> read_id_list(const std::string& path) {
    std::vector<std::string> ids;
    for (const auto& line : detail::read_lines(path)) {
        std::string t = detail::trim(line);
        if (!t.empty()) ids.push_back(t);
    }
    return ids;
}

} // namespace vreid

#endif // VREID_IO_HPP
