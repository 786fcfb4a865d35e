#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "vreid/rng.hpp"
#include "vreid/spatiotemporal.hpp"

#include "helpers.hpp"

using namespace vreid;

namespace {

// written likelihood: product over samples of (1/x_i) * N(ln x_i; mu, sigma)
double log_likelihood(const std::vector<double>& xs, double mu, double sigma) {
    double ll = 0.0;
    for (double x : xs) {
        double lx = std::log(x);
        ll += -lx - std::log(sigma * std::sqrt(2.0 * M_PI)) -
              (lx - mu) * (lx - mu) / (2.0 * sigma * sigma);
    }
    return ll;
}

// grid-refinement maximizer of the written likelihood, independent of the
// closed form under test
LogNormalParams numeric_mle(const std::vector<double>& xs) {
    double lo_mu = 1e300, hi_mu = -1e300;
    for (double x : xs) {
        lo_mu = std::min(lo_mu, std::log(x));
        hi_mu = std::max(hi_mu, std::log(x));
    }
    double lo_sigma = 1e-9, hi_sigma = (hi_mu - lo_mu) + 1.0;

    double best_mu = 0.0, best_sigma = 1.0;
    for (int iter = 0; iter < 40; ++iter) {
        double best_ll = -1e300;
        const int steps = 20;
        double dmu = (hi_mu - lo_mu) / steps;
        double dsigma = (hi_sigma - lo_sigma) / steps;
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; j <= steps; ++j) {
                double mu = lo_mu + i * dmu;
                double sigma = lo_sigma + j * dsigma;
                double ll = log_likelihood(xs, mu, sigma);
                if (ll > best_ll) {
                    best_ll = ll;
                    best_mu = mu;
                    best_sigma = sigma;
                }
            }
        lo_mu = best_mu - 1.5 * dmu;
        hi_mu = best_mu + 1.5 * dmu;
        lo_sigma = std::max(1e-9, best_sigma - 1.5 * dsigma);
        hi_sigma = best_sigma + 1.5 * dsigma;
    }
    return {best_mu, best_sigma};
}

FeatureRecord sighting(const std::string& img, const std::string& vid, const std::string& cam,
                       double t) {
    FeatureRecord r;
    r.image_id = img;
    r.vehicle_id = vid;
    r.camera_id = cam;
    r.timestamp_s = t;
    return r;
}

} // namespace

TEST_CASE("log_normal_pdf closed form") {
    LogNormalParams std_params{0.0, 1.0};
    CHECK(log_normal_pdf(1.0, std_params) ==
          Catch::Approx(1.0 / std::sqrt(2.0 * M_PI)).margin(1e-15));
    CHECK(log_normal_pdf(std::exp(1.0), std_params) ==
          Catch::Approx(0.08901605491595147).margin(1e-15));
    CHECK(log_normal_pdf(1e-300, std_params) < 1e-100);

    CHECK_THROWS_AS(log_normal_pdf(0.0, std_params), NonPositiveInput);
    CHECK_THROWS_AS(log_normal_pdf(-2.0, std_params), NonPositiveInput);
}

TEST_CASE("log_normal_pdf integrates to one") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        LogNormalParams p{rng.uniform(-1.0, 5.0), rng.uniform(0.2, 1.5)};
        // Simpson in y = ln x over (x_lo, x_hi) spanning 12 sigma each side
        double y_lo = p.mu - 12.0 * p.sigma, y_hi = p.mu + 12.0 * p.sigma;
        const int n = 20000; // even
        double h = (y_hi - y_lo) / n;
        double total = 0.0;
        for (int i = 0; i <= n; ++i) {
            double y = y_lo + i * h;
            double x = std::exp(y);
            double f = log_normal_pdf(x, p) * x; // Jacobian of the substitution
            total += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
        }
        total *= h / 3.0;
        CHECK(total == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("fit_log_normal closed form on a two-point sample") {
    auto p = fit_log_normal({1.0, std::exp(2.0)});
    CHECK(p.mu == Catch::Approx(1.0).margin(1e-12));
    CHECK(p.sigma == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("fit_log_normal rejects degenerate input") {
    CHECK_THROWS_AS(fit_log_normal({5.0, 5.0, 5.0}), DegenerateSample);
    CHECK_THROWS_AS(fit_log_normal({5.0}), DegenerateSample);
    CHECK_THROWS_AS(fit_log_normal({}), DegenerateSample);
    CHECK_THROWS_AS(fit_log_normal({1.0, -2.0}), NonPositiveSample);
    CHECK_THROWS_AS(fit_log_normal({1.0, 0.0}), NonPositiveSample);
}

TEST_CASE("fit_log_normal matches a numeric likelihood maximizer") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        double mu = rng.uniform(-1.0, 4.0);
        double sigma = rng.uniform(0.3, 1.2);
        std::vector<double> xs(200);
        for (auto& x : xs) x = rng.log_normal(mu, sigma);

        LogNormalParams closed = fit_log_normal(xs);
        LogNormalParams numeric = numeric_mle(xs);
        CHECK(std::abs(closed.mu - numeric.mu) < 1e-6);
        CHECK(std::abs(closed.sigma - numeric.sigma) < 1e-6);
    }
}

TEST_CASE("no perturbation of the closed-form fit increases the likelihood") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(40);
        double mu = rng.uniform(-2.0, 3.0), sigma = rng.uniform(0.2, 1.0);
        for (auto& x : xs) x = rng.log_normal(mu, sigma);
        LogNormalParams fit = fit_log_normal(xs);
        double base = log_likelihood(xs, fit.mu, fit.sigma);
        for (double h : {1e-4, 1e-3}) {
            CHECK(log_likelihood(xs, fit.mu + h, fit.sigma) <= base);
            CHECK(log_likelihood(xs, fit.mu - h, fit.sigma) <= base);
            CHECK(log_likelihood(xs, fit.mu, fit.sigma + h) <= base);
            if (fit.sigma - h > 0.0) CHECK(log_likelihood(xs, fit.mu, fit.sigma - h) <= base);
        }
    }
}

TEST_CASE("collect_st_samples pairs consecutive cross-camera sightings") {
    CameraGraph g;
    g.set_distance("c1", "c2", 500.0);
    g.set_distance("c2", "c3", 800.0);
    g.set_distance("c1", "c3", 900.0);

    Dataset ds;
    ds.dim = 1;
    ds.records = {sighting("a", "v1", "c1", 0.0), sighting("b", "v1", "c2", 300.0)};
    StSamples s = collect_st_samples(ds, g);
    REQUIRE(s.deltas == std::vector<double>{500.0});
    REQUIRE(s.taus == std::vector<double>{300.0});

    // a third sighting adds exactly one more consecutive transition
    ds.records.push_back(sighting("c", "v1", "c3", 1000.0));
    s = collect_st_samples(ds, g);
    CHECK(s.deltas == std::vector<double>{500.0, 800.0});
    CHECK(s.taus == std::vector<double>{300.0, 700.0});

    // same-camera consecutive pairs contribute nothing
    ds.records.push_back(sighting("d", "v1", "c3", 1200.0));
    s = collect_st_samples(ds, g);
    CHECK(s.deltas.size() == 2);
}

TEST_CASE("collect_st_samples is invariant to record order") {
    CameraGraph g;
    g.set_distance("c1", "c2", 500.0);
    g.set_distance("c2", "c3", 800.0);
    g.set_distance("c1", "c3", 900.0);

    Dataset ds;
    ds.dim = 1;
    ds.records = {sighting("a", "v1", "c1", 0.0),   sighting("b", "v1", "c2", 300.0),
                  sighting("c", "v1", "c3", 900.0), sighting("d", "v2", "c2", 50.0),
                  sighting("e", "v2", "c1", 450.0)};
    StSamples forward = collect_st_samples(ds, g);

    Dataset reversed = ds;
    std::reverse(reversed.records.begin(), reversed.records.end());
    StSamples backward = collect_st_samples(reversed, g);

    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(sorted(forward.deltas) == sorted(backward.deltas));
    CHECK(sorted(forward.taus) == sorted(backward.taus));
}

TEST_CASE("collect_st_samples needs a cross-camera transition") {
    CameraGraph g;
    g.set_distance("c1", "c2", 500.0);
    Dataset ds;
    ds.dim = 1;
    ds.records = {sighting("a", "v1", "c1", 0.0), sighting("b", "v1", "c1", 100.0)};
    CHECK_THROWS_AS(collect_st_samples(ds, g), NoPositivePairs);
}

TEST_CASE("affinities sit at one half when the density hits the offset") {
    STModel m;
    m.dist_params = {0.0, 1.0};
    m.time_params = {0.0, 1.0};
    m.alpha2 = log_normal_pdf(2.0, m.dist_params);
    m.beta2 = log_normal_pdf(3.0, m.time_params);
    CHECK(spatial_affinity(2.0, m) == 0.5);
    CHECK(temporal_affinity(3.0, m) == 0.5);
}

TEST_CASE("high density drives the affinity toward zero") {
    CHECK(affinity_from_density(1000.0, 6.0, 0.5) < 1e-12);
    CHECK(affinity_from_density(0.0, 6.0, 0.5) > 0.5);
}

TEST_CASE("affinity numeric anchor case") {
    STModel m;
    m.dist_params = {0.0, 1.0};
    m.alpha1 = 6.0;
    m.alpha2 = 0.5;
    CHECK(spatial_affinity(1.0, m) == Catch::Approx(0.64710689790735804).margin(1e-14));
    CHECK_THROWS_AS(spatial_affinity(0.0, m), NonPositiveInput);
    CHECK_THROWS_AS(temporal_affinity(-1.0, m), NonPositiveInput);
}

TEST_CASE("affinities are bounded and strictly decreasing in the density") {
    STModel m;
    double prev_s = 1.0, prev_t = 1.0;
    for (int i = 0; i <= 1000; ++i) {
        double density = i * 0.002;
        double s = affinity_from_density(density, m.alpha1, m.alpha2);
        double t = affinity_from_density(density, m.beta1, m.beta2);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        CHECK(s < prev_s);
        CHECK(t < prev_t);
        prev_s = s;
        prev_t = t;
    }
}

TEST_CASE("st model text round-trips bit-exactly") {
    testutil::TempDir tmp;
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        STModel m;
        m.dist_params = {rng.normal(), std::exp(rng.normal())};
        m.time_params = {rng.normal(), std::exp(rng.normal())};
        m.alpha1 = rng.normal() * 10.0;
        m.alpha2 = rng.normal();
        m.beta1 = rng.normal() * 10.0;
        m.beta2 = rng.normal();
        m.omega = rng.uniform();

        save_st_model(tmp.file("st.txt"), m);
        STModel back = load_st_model(tmp.file("st.txt"));
        CHECK(back.dist_params.mu == m.dist_params.mu);
        CHECK(back.dist_params.sigma == m.dist_params.sigma);
        CHECK(back.time_params.mu == m.time_params.mu);
        CHECK(back.time_params.sigma == m.time_params.sigma);
        CHECK(back.alpha1 == m.alpha1);
        CHECK(back.alpha2 == m.alpha2);
        CHECK(back.beta1 == m.beta1);
        CHECK(back.beta2 == m.beta2);
        CHECK(back.omega == m.omega);
    }
}

TEST_CASE("st model loader validates the document") {
    testutil::TempDir tmp;
    testutil::write_text(tmp.file("missing.txt"), "mu_delta = 1\n");
    CHECK_THROWS_AS(load_st_model(tmp.file("missing.txt")), BadConfigValue);

    testutil::write_text(tmp.file("unknown.txt"),
                         "mu_delta = 1\nsigma_delta = 1\nmu_tau = 1\nsigma_tau = 1\n"
                         "alpha1 = 6\nalpha2 = 0.5\nbeta1 = 6\nbeta2 = 0.5\nomega = 0.2\n"
                         "extra = 9\n");
    CHECK_THROWS_AS(load_st_model(tmp.file("unknown.txt")), UnknownConfigKey);

    testutil::write_text(tmp.file("badsigma.txt"),
                         "mu_delta = 1\nsigma_delta = 0\nmu_tau = 1\nsigma_tau = 1\n"
                         "alpha1 = 6\nalpha2 = 0.5\nbeta1 = 6\nbeta2 = 0.5\nomega = 0.2\n");
    CHECK_THROWS_AS(load_st_model(tmp.file("badsigma.txt")), BadConfigValue);
}
