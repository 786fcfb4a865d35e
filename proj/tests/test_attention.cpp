#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "vreid/attention.hpp"
#include "vreid/rng.hpp"

#include "helpers.hpp"

using namespace vreid;

namespace {

// independent element-loop evaluation of the channel gate formula
std::vector<double> channel_gate_oracle(const FeatureMap& x, const ChannelAttentionWeights& w) {
    std::size_t C = x.c, hid = w.w1.rows;
    std::vector<double> avg(C, 0.0), mx(C, -1e300);
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k) {
                avg[i] += x.at(i, j, k) / double(x.h * x.w);
                mx[i] = std::max(mx[i], x.at(i, j, k));
            }

    auto branch = [&](const std::vector<double>& pooled) {
        std::vector<double> hidden(hid, 0.0);
        for (std::size_t r = 0; r < hid; ++r) {
            for (std::size_t c = 0; c < C; ++c) hidden[r] += w.w1(r, c) * pooled[c];
            hidden[r] = std::max(0.0, hidden[r]);
        }
        std::vector<double> out(C, 0.0);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < hid; ++r) out[c] += w.w2(c, r) * hidden[r];
        return out;
    };
    std::vector<double> za = branch(avg), zm = branch(mx), gate(C);
    for (std::size_t c = 0; c < C; ++c) gate[c] = 1.0 / (1.0 + std::exp(-(za[c] + zm[c])));
    return gate;
}

FeatureMap permute_spatial(const FeatureMap& x, Rng& rng) {
    std::vector<std::size_t> perm(x.h * x.w);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

    FeatureMap out(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.c; ++i)
        for (std::size_t p = 0; p < perm.size(); ++p) {
            std::size_t q = perm[p];
            out.at(i, p / x.w, p % x.w) = x.at(i, q / x.w, q % x.w);
        }
    return out;
}

FeatureMap permute_channels(const FeatureMap& x, Rng& rng) {
    std::vector<std::size_t> perm(x.c);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

    FeatureMap out(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.c; ++i)
        for (std::size_t j = 0; j < x.h; ++j)
            for (std::size_t k = 0; k < x.w; ++k)
                out.at(i, j, k) = x.at(perm[i], j, k);
    return out;
}

} // namespace

TEST_CASE("channel_pool basics") {
    FeatureMap constant(3, 2, 2, 2.0);
    ChannelPools p = channel_pool(constant);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(p.avg[i] == 2.0);
        CHECK(p.max[i] == 2.0);
    }

    FeatureMap two(1, 1, 2);
    two.at(0, 0, 0) = 1.0;
    two.at(0, 0, 1) = 3.0;
    ChannelPools q = channel_pool(two);
    CHECK(q.avg[0] == 2.0);
    CHECK(q.max[0] == 3.0);
}

TEST_CASE("channel_pool matches an element-loop oracle") {
    Rng rng(101);
    FeatureMap x = random_feature_map(4, 3, 3, rng);
    ChannelPools p = channel_pool(x);
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0, mx = x.at(i, 0, 0);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) {
                sum += x.at(i, j, k);
                mx = std::max(mx, x.at(i, j, k));
            }
        CHECK(p.avg[i] == Catch::Approx(sum / 9.0).margin(1e-14));
        CHECK(p.max[i] == mx);
    }
}

TEST_CASE("channel_attention with zero weights gives 0.5 gates") {
    Rng rng(5);
    FeatureMap x = random_feature_map(8, 4, 5, rng);
    ChannelAttentionWeights w;
    w.reduction = 4;
    w.w1 = Matrix(2, 8);
    w.w2 = Matrix(8, 2);
    std::vector<double> gate = channel_attention(x, w);
    for (double g : gate) CHECK(g == 0.5);
}

TEST_CASE("channel_attention is invariant to spatial permutations") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        FeatureMap x = random_feature_map(6, 4, 4, rng);
        ChannelAttentionWeights w = random_channel_weights(6, 3, rng);
        std::vector<double> a = channel_attention(x, w);
        std::vector<double> b = channel_attention(permute_spatial(x, rng), w);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
    }
}

TEST_CASE("channel_attention matches the scripted formula on random instances") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        FeatureMap x = random_feature_map(5, 3, 4, rng);
        ChannelAttentionWeights w = random_channel_weights(5, 2, rng);
        std::vector<double> got = channel_attention(x, w);
        std::vector<double> want = channel_gate_oracle(x, w);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == Catch::Approx(want[i]).margin(1e-12));
    }
}

TEST_CASE("channel_attention rejects mismatched weights") {
    Rng rng(3);
    FeatureMap x = random_feature_map(4, 2, 2, rng);
    ChannelAttentionWeights w = random_channel_weights(6, 2, rng);
    CHECK_THROWS_AS(channel_attention(x, w), ShapeMismatch);
}

TEST_CASE("apply_channel_gate") {
    Rng rng(31);
    FeatureMap x = random_feature_map(3, 2, 4, rng);

    FeatureMap same = apply_channel_gate(x, {1.0, 1.0, 1.0});
    CHECK(same.data == x.data);

    FeatureMap zero = apply_channel_gate(x, {0.0, 0.0, 0.0});
    for (double v : zero.data) CHECK(v == 0.0);

    std::vector<double> gate = {0.2, 0.7, 0.9};
    FeatureMap scaled = apply_channel_gate(x, gate);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(scaled.at(i, j, k) == gate[i] * x.at(i, j, k));

    CHECK_THROWS_AS(apply_channel_gate(x, {1.0, 2.0}), ShapeMismatch);
}

TEST_CASE("apply gates are positively homogeneous") {
    Rng rng(37);
    FeatureMap x = random_feature_map(3, 3, 3, rng);
    std::vector<double> gate(3);
    for (auto& g : gate) g = rng.uniform();

    // powers of two scale exactly
    FeatureMap doubled = x;
    for (auto& v : doubled.data) v *= 2.0;
    FeatureMap a = apply_channel_gate(doubled, gate);
    FeatureMap b = apply_channel_gate(x, gate);
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == 2.0 * b.data[i]);

    FeatureMap gs(1, 3, 3);
    for (auto& v : gs.data) v = rng.uniform();
    FeatureMap c = apply_spatial_gate(doubled, gs);
    FeatureMap d = apply_spatial_gate(x, gs);
    for (std::size_t i = 0; i < c.data.size(); ++i) CHECK(c.data[i] == 2.0 * d.data[i]);
}

TEST_CASE("spatial_pool reduces across channels") {
    FeatureMap x(2, 2, 2);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) {
            x.at(0, j, k) = 1.0;
            x.at(1, j, k) = 3.0;
        }
    FeatureMap pooled = spatial_pool(x);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(pooled.at(0, j, k) == 3.0); // max plane
            CHECK(pooled.at(1, j, k) == 2.0); // mean plane
        }

    Rng rng(41);
    FeatureMap single = random_feature_map(1, 3, 2, rng);
    FeatureMap sp = spatial_pool(single);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(sp.at(0, j, k) == single.at(0, j, k));
            CHECK(sp.at(1, j, k) == single.at(0, j, k));
        }
}

TEST_CASE("spatial_pool matches an element-loop oracle") {
    Rng rng(43);
    FeatureMap x = random_feature_map(5, 3, 4, rng);
    FeatureMap pooled = spatial_pool(x);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 4; ++k) {
            double mx = x.at(0, j, k), sum = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                mx = std::max(mx, x.at(i, j, k));
                sum += x.at(i, j, k);
            }
            CHECK(pooled.at(0, j, k) == mx);
            CHECK(pooled.at(1, j, k) == Catch::Approx(sum / 5.0).margin(1e-14));
        }
}

TEST_CASE("spatial_attention with a zero kernel gives 0.5 everywhere") {
    Rng rng(47);
    FeatureMap x = random_feature_map(4, 5, 3, rng);
    SpatialAttentionWeights w;
    w.size = 3;
    w.kernel.assign(2 * 3 * 3, 0.0);
    FeatureMap gate = spatial_attention(x, w);
    REQUIRE(gate.c == 1);
    REQUIRE(gate.h == 5);
    REQUIRE(gate.w == 3);
    for (double g : gate.data) CHECK(g == 0.5);
}

TEST_CASE("spatial_attention is invariant to channel permutations") {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        FeatureMap x = random_feature_map(6, 3, 3, rng);
        SpatialAttentionWeights w = random_spatial_weights(3, rng);
        FeatureMap a = spatial_attention(x, w);
        FeatureMap b = spatial_attention(permute_channels(x, rng), w);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            CHECK(a.data[i] == Catch::Approx(b.data[i]).margin(1e-12));
    }
}

TEST_CASE("spatial_attention matches a direct convolution oracle") {
    Rng rng(59);
    FeatureMap x = random_feature_map(1, 4, 4, rng);
    SpatialAttentionWeights w = random_spatial_weights(3, rng);
    FeatureMap gate = spatial_attention(x, w);

    // with one channel both pooled planes equal the input plane
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 4; ++k) {
            double z = 0.0;
            for (std::size_t ci = 0; ci < 2; ++ci)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk) {
                        int jj = int(j) + dj, kk = int(k) + dk;
                        if (jj < 0 || kk < 0 || jj >= 4 || kk >= 4) continue;
                        z += w.at(ci, std::size_t(dj + 1), std::size_t(dk + 1)) *
                             x.at(0, std::size_t(jj), std::size_t(kk));
                    }
            double want = 1.0 / (1.0 + std::exp(-z));
            CHECK(gate.at(0, j, k) == Catch::Approx(want).margin(1e-12));
        }
}

TEST_CASE("spatial kernel size must be odd") {
    Rng rng(61);
    CHECK_THROWS_AS(random_spatial_weights(4, rng), ShapeMismatch);
    FeatureMap x = random_feature_map(2, 3, 3, rng);
    SpatialAttentionWeights w;
    w.size = 2;
    w.kernel.assign(8, 0.0);
    CHECK_THROWS_AS(spatial_attention(x, w), ShapeMismatch);
}

TEST_CASE("apply_spatial_gate") {
    Rng rng(67);
    FeatureMap x = random_feature_map(3, 2, 2, rng);

    FeatureMap ones(1, 2, 2, 1.0);
    CHECK(apply_spatial_gate(x, ones).data == x.data);

    FeatureMap zeros(1, 2, 2, 0.0);
    for (double v : apply_spatial_gate(x, zeros).data) CHECK(v == 0.0);

    FeatureMap gate(1, 2, 2);
    for (auto& v : gate.data) v = rng.uniform();
    FeatureMap got = apply_spatial_gate(x, gate);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k)
                CHECK(got.at(i, j, k) == gate.at(0, j, k) * x.at(i, j, k));

    FeatureMap wrong(1, 3, 2, 1.0);
    CHECK_THROWS_AS(apply_spatial_gate(x, wrong), ShapeMismatch);
}

TEST_CASE("attention_block with zero weights scales by 0.25") {
    Rng rng(71);
    FeatureMap x = random_feature_map(4, 3, 3, rng);
    ChannelAttentionWeights cw;
    cw.reduction = 2;
    cw.w1 = Matrix(2, 4);
    cw.w2 = Matrix(4, 2);
    SpatialAttentionWeights sw;
    sw.size = 3;
    sw.kernel.assign(18, 0.0);

    for (AttentionOrder order : {AttentionOrder::channel_then_spatial,
                                 AttentionOrder::spatial_then_channel, AttentionOrder::parallel}) {
        FeatureMap out = attention_block(x, cw, sw, order);
        for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == 0.25 * x.data[i]);
    }
}

TEST_CASE("sequential attention orders differ on a random instance") {
    Rng rng(73);
    FeatureMap x = random_feature_map(6, 4, 4, rng);
    ChannelAttentionWeights cw = random_channel_weights(6, 2, rng);
    SpatialAttentionWeights sw = random_spatial_weights(3, rng);

    FeatureMap cs = attention_block(x, cw, sw, AttentionOrder::channel_then_spatial);
    FeatureMap sc = attention_block(x, cw, sw, AttentionOrder::spatial_then_channel);
    FeatureMap par = attention_block(x, cw, sw, AttentionOrder::parallel);

    double diff_cs_sc = 0.0, diff_cs_par = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        diff_cs_sc += std::abs(cs.data[i] - sc.data[i]);
        diff_cs_par += std::abs(cs.data[i] - par.data[i]);
    }
    CHECK(diff_cs_sc > 1e-9);
    CHECK(diff_cs_par > 1e-9);
}

TEST_CASE("gates stay strictly inside (0,1) on random maps") {
    Rng rng(79);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t c = 2 + rng.index(6);
        FeatureMap x = random_feature_map(c, 2 + rng.index(4), 2 + rng.index(4), rng);
        ChannelAttentionWeights cw = random_channel_weights(c, 2, rng);
        SpatialAttentionWeights sw = random_spatial_weights(3, rng);
        for (double g : channel_attention(x, cw)) {
            CHECK(g > 0.0);
            CHECK(g < 1.0);
        }
        for (double g : spatial_attention(x, sw).data) {
            CHECK(g > 0.0);
            CHECK(g < 1.0);
        }
    }
}

TEST_CASE("hidden width rounds up when the reduction does not divide C") {
    CHECK(hidden_width(2048, 16) == 128);
    CHECK(hidden_width(10, 16) == 1);
    CHECK(hidden_width(17, 16) == 2);
    Rng rng(83);
    ChannelAttentionWeights w = random_channel_weights(10, 16, rng);
    CHECK(w.hidden() == 1);
    FeatureMap x = random_feature_map(10, 2, 2, rng);
    CHECK_NOTHROW(channel_attention(x, w));
}

TEST_CASE("attention weights survive a save/load round trip") {
    testutil::TempDir tmp;
    Rng rng(89);
    AttentionWeights w;
    w.channel = random_channel_weights(8, 4, rng);
    w.spatial = random_spatial_weights(5, rng);
    save_attention_weights(tmp.file("w.bin"), tmp.file("w.txt"), w);
    AttentionWeights back = load_attention_weights(tmp.file("w.bin"), tmp.file("w.txt"));

    REQUIRE(back.channel.w1.rows == w.channel.w1.rows);
    REQUIRE(back.channel.w1.cols == w.channel.w1.cols);
    REQUIRE(back.spatial.size == 5);
    for (std::size_t i = 0; i < w.channel.w1.data.size(); ++i)
        CHECK(back.channel.w1.data[i] == double(float(w.channel.w1.data[i])));
    for (std::size_t i = 0; i < w.spatial.kernel.size(); ++i)
        CHECK(back.spatial.kernel[i] == double(float(w.spatial.kernel[i])));
}
