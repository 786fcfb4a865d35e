#ifndef VREID_RETRIEVAL_HPP
#define VREID_RETRIEVAL_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/io.hpp"
#include "vreid/matrix.hpp"
#include "vreid/spatiotemporal.hpp"
#include "vreid/types.hpp"

namespace vreid {

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DistanceMatrix {
    Matrix values; // n_query x n_gallery
    std::vector<std::string> query_ids;
    std::vector<std::string> gallery_ids;
};

// plain (not squared) Euclidean distances, accumulated in double
inline Matrix euclidean_distances(const std::vector<std::vector<double>>& queries,
                                  const std::vector<std::vector<double>>& gallery) {
    Matrix out(queries.size(), gallery.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            if (queries[i].size() != gallery[j].size())
                throw DimensionMismatch("embedding dimensions differ");
            double s = 0.0;
            for (std::size_t f = 0; f < queries[i].size(); ++f) {
                double d = queries[i][f] - gallery[j][f];
                s += d * d;
            }
            out(i, j) = std::sqrt(s);
        }
    }
    return out;
}

inline DistanceMatrix appearance_distances(const std::vector<std::vector<double>>& queries,
                                           const std::vector<std::vector<double>>& gallery,
                                           std::vector<std::string> query_ids,
                                           std::vector<std::string> gallery_ids) {
    DistanceMatrix dm;
    dm.values = euclidean_distances(queries, gallery);
    dm.query_ids = std::move(query_ids);
    dm.gallery_ids = std::move(gallery_ids);
    return dm;
}

inline DistanceMatrix appearance_distances(const Dataset& ds,
                                           const std::vector<std::size_t>& query_idx,
                                           const std::vector<std::size_t>& gallery_idx) {
    std::vector<std::vector<double>> q, g;
    std::vector<std::string> qids, gids;
    for (std::size_t i : query_idx) {
        q.emplace_back(ds.records[i].embedding.begin(), ds.records[i].embedding.end());
        qids.push_back(ds.records[i].image_id);
    }
    for (std::size_t j : gallery_idx) {
        g.emplace_back(ds.records[j].embedding.begin(), ds.records[j].embedding.end());
        gids.push_back(ds.records[j].image_id);
    }
    return appearance_distances(q, g, std::move(qids), std::move(gids));
}

// optional scale alignment before fusion: per row, map [min,max] onto [0,1]
inline void min_max_normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double lo = m(i, 0), hi = m(i, 0);
        for (std::size_t j = 1; j < m.cols; ++j) {
            lo = std::min(lo, m(i, j));
            hi = std::max(hi, m(i, j));
        }
        double range = hi - lo;
        if (range <= 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = (m(i, j) - lo) / range;
    }
}

// fused(i,j) = d_a(i,j) + omega * (D_s + D_t). Same-camera pairs carry no
// spatio-temporal term (delta = 0 lies outside log-normal support); a zero
// time gap across cameras enters as density 0, the limiting value.
inline DistanceMatrix fuse(const DistanceMatrix& d_a, const std::vector<FeatureRecord>& queries,
                           const std::vector<FeatureRecord>& gallery, const CameraGraph& graph,
                           const STModel& m) {
    if (queries.size() != d_a.values.rows || gallery.size() != d_a.values.cols)
        throw DimensionMismatch("record lists do not match the distance matrix");

    DistanceMatrix out = d_a;
    if (m.omega == 0.0) return out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            if (queries[i].camera_id == gallery[j].camera_id) continue;
            double delta = graph.distance(queries[i].camera_id, gallery[j].camera_id);
            double tau = std::abs(queries[i].timestamp_s - gallery[j].timestamp_s);
            double ds = affinity_from_density(log_normal_pdf(delta, m.dist_params), m.alpha1, m.alpha2);
            double tau_density = tau > 0.0 ? log_normal_pdf(tau, m.time_params) : 0.0;
            double dt = affinity_from_density(tau_density, m.beta1, m.beta2);
            out.values(i, j) += m.omega * (ds + dt);
        }
    }
    return out;
}

struct RankingResult {
    std::vector<std::string> query_ids;
    std::vector<std::string> gallery_ids;
    std::vector<std::vector<std::size_t>> order; // per query, gallery indices ascending
    std::vector<std::vector<double>> distances;  // aligned with order
};

// stable ascending sort per row; ties keep the lower gallery index first
inline RankingResult rank(const DistanceMatrix& d) {
    RankingResult rr;
    rr.query_ids = d.query_ids;
    rr.gallery_ids = d.gallery_ids;
    rr.order.resize(d.values.rows);
    rr.distances.resize(d.values.rows);
    for (std::size_t i = 0; i < d.values.rows; ++i) {
        std::vector<std::size_t> idx(d.values.cols);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return d.values(i, a) < d.values(i, b);
        });
        rr.distances[i].reserve(idx.size());
        for (std::size_t j : idx) rr.distances[i].push_back(d.values(i, j));
        rr.order[i] = std::move(idx);
    }
    return rr;
}

// ---------------------------------------------------------------------------
// ranking CSV: query_id,rank,gallery_id,distance with rank starting at 1

inline constexpr const char* kRankingHeader = "query_id,rank,gallery_id,distance";

inline void write_ranking_csv(const std::string& path, const RankingResult& rr) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kRankingHeader << "\n";
    for (std::size_t i = 0; i < rr.order.size(); ++i)
        for (std::size_t r = 0; r < rr.order[i].size(); ++r)
            out << rr.query_ids[i] << "," << (r + 1) << "," << rr.gallery_ids[rr.order[i][r]]
                << "," << fmt_g17(rr.distances[i][r]) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

// one query's ranked gallery, ascending by distance
struct RankedList {
    std::string query_id;
    std::vector<std::string> gallery_ids;
    std::vector<double> distances;
};

inline std::vector<RankedList> ranked_lists(const RankingResult& rr) {
    std::vector<RankedList> lists(rr.order.size());
    for (std::size_t i = 0; i < rr.order.size(); ++i) {
        lists[i].query_id = rr.query_ids[i];
        lists[i].distances = rr.distances[i];
        lists[i].gallery_ids.reserve(rr.order[i].size());
        for (std::size_t j : rr.order[i]) lists[i].gallery_ids.push_back(rr.gallery_ids[j]);
    }
    return lists;
}

inline std::vector<RankedList> read_ranking_csv(const std::string& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != kRankingHeader)
        throw MalformedHeader(lines.empty() ? "" : lines[0]);

    std::vector<RankedList> lists;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        auto fields = detail::split_csv(lines[i]);
        if (fields.size() != 4)
            throw MalformedRow(i + 1, "expected 4 fields, got " + std::to_string(fields.size()));
        double rank_no, dist;
        if (!detail::parse_double(fields[1], rank_no) || rank_no < 1.0)
            throw MalformedRow(i + 1, "bad rank");
        if (!detail::parse_double(fields[3], dist))
            throw MalformedRow(i + 1, "bad distance");

        if (lists.empty() || lists.back().query_id != fields[0]) {
            if (rank_no != 1.0) throw MalformedRow(i + 1, "query block must start at rank 1");
            lists.push_back({fields[0], {}, {}});
        } else if (std::size_t(rank_no) != lists.back().gallery_ids.size() + 1) {
            throw MalformedRow(i + 1, "ranks must be contiguous");
        }
        lists.back().gallery_ids.push_back(fields[2]);
        lists.back().distances.push_back(dist);
    }
    return lists;
}

} // namespace vreid

#endif // VREID_RETRIEVAL_HPP
