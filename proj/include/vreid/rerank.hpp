#ifndef VREID_RERANK_HPP
#define VREID_RERANK_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vreid/matrix.hpp"
#include "vreid/retrieval.hpp"

namespace vreid {

struct BadK : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// k-reciprocal set of row i: the forward list is the first `count` ranked
// indices (self included); kept are those whose own forward list contains i.
inline std::vector<std::size_t> k_reciprocal_set(const std::vector<std::vector<std::size_t>>& ranks,
                                                 std::size_t i, std::size_t count) {
    std::vector<std::size_t> out;
    for (std::size_t pos = 0; pos < count; ++pos) {
        std::size_t cand = ranks[i][pos];
        for (std::size_t back = 0; back < count; ++back)
            if (ranks[cand][back] == i) {
                out.push_back(cand);
                break;
            }
    }
    return out;
}

} // namespace detail

// k-reciprocal re-ranking over the joint (query + gallery) index space.
// Neighbor sets follow the published encoding: reciprocal top-k1 sets
// expanded with half-k1 reciprocal sets that overlap by more than 2/3,
// Gaussian-weighted membership vectors, local query expansion over the top
// k2, and the Jaccard distance 1 - sum(min)/(2 - sum(min)). The output blends
// the Jaccard distance with the raw query-gallery input:
//   final = (1 - lambda_rr) * jaccard + lambda_rr * d_qg
// so lambda_rr = 1 returns d_qg unchanged.
inline Matrix k_reciprocal_rerank(const Matrix& d_qg, const Matrix& d_qq, const Matrix& d_gg,
                                  std::size_t k1, std::size_t k2, double lambda_rr) {
    if (k1 < 1 || k2 < 1 || k2 >= k1) throw BadK("need k1 > k2 >= 1");
    if (lambda_rr < 0.0 || lambda_rr > 1.0) throw BadK("lambda_rr must be in [0,1]");
    std::size_t nq = d_qg.rows;
    std::size_t ng = d_qg.cols;
    if (d_qq.rows != nq || d_qq.cols != nq || d_gg.rows != ng || d_gg.cols != ng)
        throw ShapeMismatch("re-ranking blocks have inconsistent shapes");

    std::size_t all = nq + ng;

    // joint squared distances, then each row scaled by its max (the matrix is
    // treated as symmetric, so row and column maxima coincide)
    Matrix dist(all, all);
    for (std::size_t i = 0; i < all; ++i)
        for (std::size_t j = 0; j < all; ++j) {
            double v;
            if (i < nq && j < nq) v = d_qq(i, j);
            else if (i < nq) v = d_qg(i, j - nq);
            else if (j < nq) v = d_qg(j, i - nq);
            else v = d_gg(i - nq, j - nq);
            dist(i, j) = v * v;
        }
    for (std::size_t i = 0; i < all; ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < all; ++j) mx = std::max(mx, dist(i, j));
        if (mx > 0.0)
            for (std::size_t j = 0; j < all; ++j) dist(i, j) /= mx;
    }

    std::vector<std::vector<std::size_t>> ranks(all);
    for (std::size_t i = 0; i < all; ++i) {
        ranks[i].resize(all);
        std::iota(ranks[i].begin(), ranks[i].end(), 0);
        std::stable_sort(ranks[i].begin(), ranks[i].end(),
                         [&](std::size_t a, std::size_t b) { return dist(i, a) < dist(i, b); });
    }

    std::size_t top = std::min(k1 + 1, all);
    std::size_t half = std::min(std::size_t(std::nearbyint(double(k1) / 2.0)) + 1, all);

    Matrix v(all, all);
    std::vector<char> member(all);
    for (std::size_t i = 0; i < all; ++i) {
        std::vector<std::size_t> recip = detail::k_reciprocal_set(ranks, i, top);

        std::fill(member.begin(), member.end(), 0);
        for (std::size_t r : recip) member[r] = 1;
        std::vector<std::size_t> expanded = recip;
        for (std::size_t cand : recip) {
            std::vector<std::size_t> cand_recip = detail::k_reciprocal_set(ranks, cand, half);
            std::size_t overlap = 0;
            for (std::size_t r : cand_recip)
                if (member[r]) ++overlap;
            if (3 * overlap > 2 * cand_recip.size())
                expanded.insert(expanded.end(), cand_recip.begin(), cand_recip.end());
        }
        std::sort(expanded.begin(), expanded.end());
        expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());

        double total = 0.0;
        for (std::size_t r : expanded) total += std::exp(-dist(i, r));
        for (std::size_t r : expanded) v(i, r) = std::exp(-dist(i, r)) / total;
    }

    // local query expansion: average the membership rows of the k2 nearest
    if (k2 > 1) {
        std::size_t k2c = std::min(k2, all);
        Matrix ve(all, all);
        for (std::size_t i = 0; i < all; ++i)
            for (std::size_t pos = 0; pos < k2c; ++pos) {
                std::size_t nb = ranks[i][pos];
                for (std::size_t j = 0; j < all; ++j) ve(i, j) += v(nb, j) / double(k2c);
            }
        v = std::move(ve);
    }

    Matrix final_dist(nq, ng);
    for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            double overlap = 0.0;
            for (std::size_t c = 0; c < all; ++c) overlap += std::min(v(i, c), v(nq + j, c));
            double jaccard = 1.0 - overlap / (2.0 - overlap);
            final_dist(i, j) = (1.0 - lambda_rr) * jaccard + lambda_rr * d_qg(i, j);
        }
    return final_dist;
}

inline DistanceMatrix k_reciprocal_rerank(const DistanceMatrix& d_qg, const Matrix& d_qq,
                                          const Matrix& d_gg, std::size_t k1, std::size_t k2,
                                          double lambda_rr) {
    DistanceMatrix out;
    out.query_ids = d_qg.query_ids;
    out.gallery_ids = d_qg.gallery_ids;
    out.values = k_reciprocal_rerank(d_qg.values, d_qq, d_gg, k1, k2, lambda_rr);
    return out;
}

} // namespace vreid

#endif // VREID_RERANK_HPP
