#ifndef VREID_LOSSES_HPP
#define VREID_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/division.hpp"
#include "vreid/io.hpp"
#include "vreid/matrix.hpp"
#include "vreid/rng.hpp"
#include "vreid/types.hpp"

namespace vreid {

struct BadEpsilon : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoPositive : std::runtime_error {
    explicit NoPositive(std::size_t anchor)
        : std::runtime_error("anchor " + std::to_string(anchor) + " has no positive in batch"),
          anchor(anchor) {}
    std::size_t anchor;
};

struct NoNegative : std::runtime_error {
    explicit NoNegative(std::size_t anchor)
        : std::runtime_error("anchor " + std::to_string(anchor) + " has no negative in batch"),
          anchor(anchor) {}
    std::size_t anchor;
};

// (1-eps) on the true class, eps/(K-1) elsewhere
inline std::vector<double> smooth_labels(std::size_t y, std::size_t num_classes, double eps) {
    if (eps < 0.0 || eps > 1.0) throw BadEpsilon("epsilon must be in [0,1]");
    if (num_classes < 2) throw BadEpsilon("label smoothing needs at least 2 classes");
    if (y >= num_classes) throw BadEpsilon("label out of range");
    std::vector<double> p(num_classes, eps / double(num_classes - 1));
    p[y] = 1.0 - eps;
    return p;
}

struct CrossEntropyResult {
    double loss = 0.0;
    Matrix grad_logits; // (q - p) / N
};

inline CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels,
                                        double eps) {
    if (labels.size() != logits.rows) throw ShapeMismatch("one label per logits row required");
    std::size_t n = logits.rows;
    std::size_t k = logits.cols;

    CrossEntropyResult res;
    res.grad_logits = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits(i, j) - mx);
        double log_denom = std::log(denom);

        std::vector<double> p = smooth_labels(labels[i], k, eps);
        for (std::size_t j = 0; j < k; ++j) {
            double log_q = logits(i, j) - mx - log_denom;
            res.loss -= p[j] * log_q;
            res.grad_logits(i, j) = (std::exp(log_q) - p[j]) / double(n);
        }
    }
    res.loss /= double(n);
    return res;
}

namespace detail {

inline Matrix pairwise_sq_dist(const Matrix& x) {
    Matrix d(x.rows, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = i + 1; j < x.rows; ++j) {
            double s = 0.0;
            for (std::size_t f = 0; f < x.cols; ++f) {
                double diff = x(i, f) - x(j, f);
                s += diff * diff;
            }
            d(i, j) = s;
            d(j, i) = s;
        }
    return d;
}

} // namespace detail

struct TripletResult {
    double loss = 0.0;
    Matrix grad_features;
};

// Batch-hard mining over squared Euclidean distances: per anchor, the
// farthest positive and the nearest negative, with ties broken by the lowest
// index. The hinge subgradient at exactly zero is taken as zero.
inline TripletResult triplet_batch_hard(const Matrix& features,
                                        const std::vector<std::size_t>& labels, double margin) {
    if (labels.size() != features.rows) throw ShapeMismatch("one label per feature row required");
    std::size_t n = features.rows;
    Matrix d2 = detail::pairwise_sq_dist(features);

    TripletResult res;
    res.grad_features = Matrix(n, features.cols);
    for (std::size_t a = 0; a < n; ++a) {
        bool has_pos = false, has_neg = false;
        std::size_t hard_pos = 0, hard_neg = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) continue;
            if (labels[j] == labels[a]) {
                if (!has_pos || d2(a, j) > d2(a, hard_pos)) {
                    hard_pos = j;
                    has_pos = true;
                }
            } else {
                if (!has_neg || d2(a, j) < d2(a, hard_neg)) {
                    hard_neg = j;
                    has_neg = true;
                }
            }
        }
        if (!has_pos) throw NoPositive(a);
        if (!has_neg) throw NoNegative(a);

        double arg = d2(a, hard_pos) - d2(a, hard_neg) + margin;
        if (arg <= 0.0) continue;
        res.loss += arg;

        double scale = 2.0 / double(n);
        for (std::size_t f = 0; f < features.cols; ++f) {
            double dp = features(a, f) - features(hard_pos, f);
            double dn = features(a, f) - features(hard_neg, f);
            res.grad_features(a, f) += scale * (dp - dn);
            res.grad_features(hard_pos, f) -= scale * dp;
            res.grad_features(hard_neg, f) += scale * dn;
        }
    }
    res.loss /= double(n);
    return res;
}

struct Batch {
    Matrix features;                 // N x d
    std::vector<std::size_t> labels; // values in [0, K)
    Matrix logits;                   // N x K
};

struct LossValue {
    double total = 0.0;
    double ce = 0.0;
    double tri = 0.0;
    Matrix grad_logits;
    Matrix grad_features;
};

inline LossValue total_loss(const Batch& batch, const EngineConfig& cfg) {
    LossValue out;
    CrossEntropyResult ce = cross_entropy(batch.logits, batch.labels, cfg.epsilon);
    TripletResult tri = triplet_batch_hard(batch.features, batch.labels, cfg.margin);
    out.ce = ce.loss;
    out.tri = tri.loss;
    out.total = ce.loss + cfg.lambda * tri.loss;
    out.grad_logits = std::move(ce.grad_logits);
    out.grad_features = std::move(tri.grad_features);
    for (auto& g : out.grad_features.data) g *= cfg.lambda;
    return out;
}

// P identities x K images per identity, the mining-friendly batch layout.
// Only identities with at least two images are eligible when K > 1; images
// repeat cyclically for identities with fewer than K.
inline std::vector<std::size_t> sample_pk_batch(const std::vector<std::size_t>& labels,
                                                std::size_t p, std::size_t k, Rng& rng) {
    std::map<std::size_t, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

    std::vector<std::size_t> eligible;
    for (const auto& [label, idx] : by_label)
        if (k < 2 || idx.size() >= 2) eligible.push_back(label);
    if (eligible.size() < p)
        throw std::invalid_argument("not enough identities for a " + std::to_string(p) + "x" +
                                    std::to_string(k) + " batch");

    for (std::size_t i = eligible.size(); i > 1; --i)
        std::swap(eligible[i - 1], eligible[rng.index(i)]);

    std::vector<std::size_t> batch;
    for (std::size_t pi = 0; pi < p; ++pi) {
        auto idx = by_label[eligible[pi]];
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.index(i)]);
        for (std::size_t ki = 0; ki < k; ++ki) batch.push_back(idx[ki % idx.size()]);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// toy trainer: linear embedder + linear classifier head, full-batch descent

struct ToyTrainOptions {
    std::size_t epochs = 50;
    double learning_rate = 0.05;
    std::size_t embed_dim = 0; // 0 means keep the input dimension
    bool skip_triplet = false; // cross-entropy-only baseline
    bool use_bnneck = false;   // standardize the classifier-space view
};

struct TraceRow {
    std::size_t epoch = 0;
    double total = 0.0;
    double ce = 0.0;
    double tri = 0.0;
};

struct ToyTrainResult {
    Matrix embedder;   // d_out x d_in
    Matrix classifier; // K x d_out
    std::vector<TraceRow> trace;
    std::vector<std::string> class_ids; // index -> vehicle_id
};

inline std::vector<std::size_t> class_indices(const Dataset& ds, std::vector<std::string>* ids_out) {
    std::map<std::string, std::size_t> order;
    for (const auto& r : ds.records) order.emplace(r.vehicle_id, 0);
    std::size_t next = 0;
    for (auto& [vid, idx] : order) idx = next++;
    if (ids_out) {
        ids_out->resize(order.size());
        for (const auto& [vid, idx] : order) (*ids_out)[idx] = vid;
    }
    std::vector<std::size_t> labels;
    labels.reserve(ds.records.size());
    for (const auto& r : ds.records) labels.push_back(order[r.vehicle_id]);
    return labels;
}

// Trace rows are losses evaluated before each update plus one final row, so
// trace.front() is the seeded-initialization loss and trace.back() the loss
// after the last step.
inline ToyTrainResult train_toy(const Dataset& ds, const EngineConfig& cfg,
                                const ToyTrainOptions& opt) {
    ToyTrainResult res;
    std::vector<std::size_t> labels = class_indices(ds, &res.class_ids);
    std::size_t num_classes = res.class_ids.size();
    if (num_classes < 2) throw std::invalid_argument("toy training needs at least 2 identities");

    std::size_t n = ds.records.size();
    std::size_t d_in = ds.dim;
    std::size_t d_out = opt.embed_dim == 0 ? d_in : opt.embed_dim;

    Matrix x(n, d_in);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d_in; ++j)
            x(i, j) = ds.records[i].embedding[j];

    Rng rng(cfg.seed);
    res.embedder = Matrix(d_out, d_in);
    res.classifier = Matrix(num_classes, d_out);
    for (auto& v : res.embedder.data) v = rng.normal() / std::sqrt(double(d_in));
    for (auto& v : res.classifier.data) v = rng.normal() / std::sqrt(double(d_out));

    for (std::size_t epoch = 0; epoch <= opt.epochs; ++epoch) {
        Matrix z = matmul_nt(x, res.embedder); // n x d_out

        Matrix zc = z;
        BnNeck bn;
        if (opt.use_bnneck) {
            bn = BnNeck::fit(z);
            zc = bn.apply(z);
        }
        Matrix logits = matmul_nt(zc, res.classifier); // n x K

        CrossEntropyResult ce = cross_entropy(logits, labels, cfg.epsilon);
        TripletResult tri;
        if (!opt.skip_triplet) tri = triplet_batch_hard(z, labels, cfg.margin);
        double tri_loss = opt.skip_triplet ? 0.0 : tri.loss;
        res.trace.push_back({epoch, ce.loss + cfg.lambda * tri_loss, ce.loss, tri_loss});
        if (epoch == opt.epochs) break;

        Matrix grad_classifier = matmul_tn(ce.grad_logits, zc);  // K x d_out
        Matrix grad_zc = matmul(ce.grad_logits, res.classifier); // n x d_out
        if (opt.use_bnneck) {
            // standardization statistics treated as constants
            for (std::size_t i = 0; i < grad_zc.rows; ++i)
                for (std::size_t j = 0; j < grad_zc.cols; ++j)
                    grad_zc(i, j) *= bn.inv_std[j];
        }
        if (!opt.skip_triplet)
            for (std::size_t i = 0; i < grad_zc.data.size(); ++i)
                grad_zc.data[i] += cfg.lambda * tri.grad_features.data[i];

        Matrix grad_embedder = matmul_tn(grad_zc, x); // d_out x d_in
        for (std::size_t i = 0; i < res.embedder.data.size(); ++i)
            res.embedder.data[i] -= opt.learning_rate * grad_embedder.data[i];
        for (std::size_t i = 0; i < res.classifier.data.size(); ++i)
            res.classifier.data[i] -= opt.learning_rate * grad_classifier.data[i];
    }
    return res;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "epoch,total,ce,tri\n";
    for (const auto& row : trace)
        out << row.epoch << "," << fmt_g17(row.total) << "," << fmt_g17(row.ce) << ","
            << fmt_g17(row.tri) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace vreid

#endif // VREID_LOSSES_HPP
