#ifndef VREID_METRICS_HPP
#define VREID_METRICS_HPP

#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/io.hpp"
#include "vreid/retrieval.hpp"
#include "vreid/rng.hpp"
#include "vreid/types.hpp"

namespace vreid {

enum class Protocol { cross_camera, all };

struct NoValidQueries : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownImageId : std::runtime_error {
    explicit UnknownImageId(const std::string& id)
        : std::runtime_error("image id '" + id + "' not found in metadata") {}
};

struct EvalReport {
    double map = 0.0;
    std::vector<double> cmc;          // index r-1 holds rank-r accuracy
    std::vector<double> per_query_ap; // one entry per valid query, in query order
    std::size_t num_valid_queries = 0;

    double top(std::size_t r) const {
        if (cmc.empty()) return 0.0;
        return cmc[std::min(r, cmc.size()) - 1];
    }
};

struct RelevanceMask {
    std::vector<char> relevant;
    std::vector<char> junk; // removed before scoring, never ranked against
};

// Cross-camera protocol: a gallery item matches only when it shares the
// vehicle and sits on a different camera; same-vehicle same-camera items are
// junk. The "all" protocol counts every same-vehicle item and keeps nothing
// as junk.
inline RelevanceMask relevance_mask(const FeatureRecord& query,
                                    const std::vector<const FeatureRecord*>& gallery,
                                    Protocol protocol) {
    RelevanceMask mask;
    mask.relevant.resize(gallery.size(), 0);
    mask.junk.resize(gallery.size(), 0);
    for (std::size_t j = 0; j < gallery.size(); ++j) {
        bool same_vehicle = gallery[j]->vehicle_id == query.vehicle_id;
        bool same_camera = gallery[j]->camera_id == query.camera_id;
        if (protocol == Protocol::cross_camera) {
            if (same_vehicle && !same_camera) mask.relevant[j] = 1;
            else if (same_vehicle && same_camera) mask.junk[j] = 1;
        } else if (same_vehicle) {
            mask.relevant[j] = 1;
        }
    }
    return mask;
}

// non-interpolated AP over a junk-free ranked relevance list; nullopt when
// the query has no relevant item
inline std::optional<double> average_precision(const std::vector<char>& flags) {
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < flags.size(); ++r)
        if (flags[r]) {
            ++hits;
            ap += double(hits) / double(r + 1);
        }
    if (hits == 0) return std::nullopt;
    return ap / double(hits);
}

// cmc[r-1] = fraction of queries whose first relevant item lands at rank <= r
inline std::vector<double> cmc(const std::vector<std::vector<char>>& flags_per_query,
                               std::size_t max_rank) {
    std::vector<double> curve(max_rank, 0.0);
    std::size_t valid = 0;
    for (const auto& flags : flags_per_query) {
        std::size_t first = flags.size();
        for (std::size_t r = 0; r < flags.size(); ++r)
            if (flags[r]) {
                first = r;
                break;
            }
        if (first == flags.size()) continue; // no relevant item; not a valid query
        ++valid;
        for (std::size_t r = first; r < max_rank; ++r) curve[r] += 1.0;
    }
    if (valid > 0)
        for (auto& v : curve) v /= double(valid);
    return curve;
}

inline EvalReport evaluate(const std::vector<RankedList>& ranking, const Dataset& ds,
                           Protocol protocol, std::size_t max_rank = 50) {
    std::map<std::string, const FeatureRecord*> by_id;
    for (const auto& r : ds.records) by_id.emplace(r.image_id, &r);
    auto lookup = [&](const std::string& id) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw UnknownImageId(id);
        return it->second;
    };

    EvalReport report;
    std::vector<std::vector<char>> kept_flags;
    for (const auto& list : ranking) {
        const FeatureRecord* query = lookup(list.query_id);
        std::vector<const FeatureRecord*> gallery;
        gallery.reserve(list.gallery_ids.size());
        for (const auto& gid : list.gallery_ids) gallery.push_back(lookup(gid));

        RelevanceMask mask = relevance_mask(*query, gallery, protocol);
        std::vector<char> flags;
        flags.reserve(gallery.size());
        for (std::size_t j = 0; j < gallery.size(); ++j)
            if (!mask.junk[j]) flags.push_back(mask.relevant[j]);

        if (auto ap = average_precision(flags)) {
            report.per_query_ap.push_back(*ap);
            ++report.num_valid_queries;
        }
        kept_flags.push_back(std::move(flags));
    }
    if (report.num_valid_queries == 0)
        throw NoValidQueries("no query has a relevant gallery item under this protocol");

    for (double ap : report.per_query_ap) report.map += ap;
    report.map /= double(report.num_valid_queries);
    report.cmc = cmc(kept_flags, max_rank);
    return report;
}

inline void save_report(const std::string& path, const EvalReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "map = " << fmt_g17(r.map) << "\n";
    out << "top1 = " << fmt_g17(r.top(1)) << "\n";
    out << "top5 = " << fmt_g17(r.top(5)) << "\n";
    out << "cmc = ";
    for (std::size_t i = 0; i < r.cmc.size(); ++i)
        out << (i ? "," : "") << fmt_g17(r.cmc[i]);
    out << "\n";
    out << "num_valid_queries = " << r.num_valid_queries << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// repeated-split protocol: one seeded gallery image per identity, the rest
// become queries; reports from several draws are averaged

struct SplitIndices {
    std::vector<std::size_t> query;
    std::vector<std::size_t> gallery;
};

inline SplitIndices sample_split(const Dataset& ds, Rng& rng) {
    std::map<std::string, std::vector<std::size_t>> by_vehicle;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        by_vehicle[ds.records[i].vehicle_id].push_back(i);

    SplitIndices split;
    for (const auto& [vid, idx] : by_vehicle) {
        std::size_t pick = rng.index(idx.size());
        for (std::size_t pos = 0; pos < idx.size(); ++pos)
            (pos == pick ? split.gallery : split.query).push_back(idx[pos]);
    }
    return split;
}

inline EvalReport average_reports(const std::vector<EvalReport>& reports) {
    EvalReport avg;
    if (reports.empty()) return avg;
    std::size_t max_len = 0;
    for (const auto& r : reports) max_len = std::max(max_len, r.cmc.size());
    avg.cmc.assign(max_len, 0.0);
    for (const auto& r : reports) {
        avg.map += r.map;
        avg.num_valid_queries += r.num_valid_queries;
        for (std::size_t i = 0; i < r.cmc.size(); ++i) avg.cmc[i] += r.cmc[i];
    }
    avg.map /= double(reports.size());
    for (auto& v : avg.cmc) v /= double(reports.size());
    return avg;
}

} // namespace vreid

#endif // VREID_METRICS_HPP
