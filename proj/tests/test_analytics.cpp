#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "d2v/analytics.hpp"
#include "d2v/synth.hpp"
#include "test_util.hpp"

using namespace d2v;

namespace {

ChannelSchema one_channel_schema(const std::string& name) {
    ChannelSchema s;
    s.channels = {{name, ChannelKind::Float, false}};
    return s;
}

Session session_from(const std::vector<double>& values, const std::string& id = "s") {
    Session s;
    s.session_id = id;
    s.values = Matrix(values.size(), 1);
    for (size_t i = 0; i < values.size(); ++i) s.values(i, 0) = values[i];
    return s;
}

// O(n^2) pairwise AUROC oracle with half credit for ties.
double auroc_bruteforce(const std::vector<double>& pos, const std::vector<double>& neg) {
    double num = 0.0;
    for (double p : pos)
        for (double n : neg) num += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return num / (double(pos.size()) * double(neg.size()));
}

double mean_silhouette(const Matrix& y, const std::vector<int>& labels) {
    const size_t n = y.rows;
    auto dist = [&](size_t a, size_t b) {
        double s = 0;
        for (size_t c = 0; c < y.cols; ++c) {
            const double d = y(a, c) - y(b, c);
            s += d * d;
        }
        return std::sqrt(s);
    };
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
        double intra = 0, inter = 0;
        size_t n_intra = 0, n_inter = 0;
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (labels[i] == labels[j]) {
                intra += dist(i, j);
                ++n_intra;
            } else {
                inter += dist(i, j);
                ++n_inter;
            }
        }
        const double a = intra / double(n_intra);
        const double b = inter / double(n_inter);
        total += (b - a) / std::max(a, b);
    }
    return total / double(n);
}

}  // namespace

TEST_CASE("scan_events") {
    const auto schema = one_channel_schema("brake_pedal");
    DetectorConfig cfg;

    SUBCASE("constant channel has no events") {
        Session s = session_from(std::vector<double>(200, 12.0));
        CHECK(scan_events(s, schema, cfg, ScanMode::Threshold, "brake").empty());
        CHECK(scan_events(s, schema, cfg, ScanMode::TopK, "brake").empty());
    }
    SUBCASE("a single step crossing epsilon yields one event") {
        std::vector<double> v(100, 0.0);
        for (size_t i = 50; i < 100; ++i) v[i] = 30.0;
        Session s = session_from(v);
        auto events = scan_events(s, schema, cfg, ScanMode::Threshold, "brake");
        REQUIRE(events.size() == 1);
        CHECK(events[0].score == doctest::Approx(30.0));
        CHECK(events[0].start >= 47);
        CHECK(events[0].start <= 50);
        CHECK(events[0].kind == "brake");
    }
    SUBCASE("threshold mode keeps everything above epsilon, sorted by score") {
        // each plateau has a rising and a falling edge; both count
        std::vector<double> v(300, 0.0);
        auto bump = [&](size_t at, double height) {
            for (size_t i = at; i < at + 6; ++i) v[i] = height;
        };
        bump(50, 30.0);
        bump(150, 60.0);
        bump(250, 20.0);  // below epsilon
        Session s = session_from(v);
        auto events = scan_events(s, schema, cfg, ScanMode::Threshold, "brake");
        REQUIRE(events.size() == 4);
        CHECK(events[0].score == doctest::Approx(60.0));
        CHECK(events[1].score == doctest::Approx(60.0));
        CHECK(events[2].score == doctest::Approx(30.0));
        CHECK(events[3].score == doctest::Approx(30.0));
    }
    SUBCASE("top-k mode caps the number of events") {
        std::vector<double> v(500, 0.0);
        for (size_t k = 0; k < 8; ++k)
            for (size_t i = 0; i < 5; ++i) v[40 + 50 * k + i] = 30.0 + double(k);
        Session s = session_from(v);
        DetectorConfig top;
        top.top_k = 3;
        auto events = scan_events(s, schema, top, ScanMode::TopK, "brake");
        REQUIRE(events.size() == 3);
        CHECK(events[0].score >= events[1].score);
        CHECK(events[1].score >= events[2].score);
        CHECK(events[0].score == doctest::Approx(37.0));
    }
    SUBCASE("shifting the session shifts event indices") {
        std::vector<double> v(200, 5.0);
        for (size_t i = 80; i < 90; ++i) v[i] = 45.0;
        Session a = session_from(v);
        std::vector<double> shifted(30, 5.0);
        shifted.insert(shifted.end(), v.begin(), v.end());
        Session b = session_from(shifted);
        auto ea = scan_events(a, schema, cfg, ScanMode::Threshold, "brake");
        auto eb = scan_events(b, schema, cfg, ScanMode::Threshold, "brake");
        REQUIRE(ea.size() == eb.size());
        for (size_t i = 0; i < ea.size(); ++i) CHECK(eb[i].start == ea[i].start + 30);
    }
    SUBCASE("unknown channel is an error") {
        Session s = session_from(std::vector<double>(50, 0.0));
        DetectorConfig bad;
        bad.channel = "nope";
        CHECK_THROWS_AS(scan_events(s, schema, bad, ScanMode::TopK, "x"), DataError);
    }
}

TEST_CASE("similarity index") {
    SimilarityIndex index;
    index.add({1.0, 0.0, 0.0});
    index.add({0.0, 3.0, 0.0});  // normalized internally

    CHECK(index.score({2.0, 0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(index.score({0.0, 0.0, 5.0}) == doctest::Approx(0.0));

    // invariant to positive scaling of the query
    std::mt19937_64 rng(3);
    Vec q = oracle::random_vec(3, rng);
    Vec q10(q);
    for (auto& v : q10) v *= 10.0;
    CHECK(index.score(q) == doctest::Approx(index.score(q10)).epsilon(1e-12));

    CHECK_THROWS_AS(index.score({0.0, 0.0, 0.0}), NumericError);
    CHECK_THROWS_AS(index.add({0.0, 0.0, 0.0}), NumericError);
    SimilarityIndex empty;
    CHECK_THROWS_AS(empty.score({1.0, 0.0, 0.0}), DataError);
}

TEST_CASE("auroc") {
    CHECK(auroc({0.9, 0.8}, {0.1, 0.2}) == 1.0);
    CHECK(auroc({0.5, 0.5}, {0.5, 0.5}) == 0.5);
    CHECK(auroc({0.1}, {0.9}) == 0.0);

    SUBCASE("equals the pairwise oracle exactly, ties included") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> pos, neg;
            const size_t np = 10 + rng() % 190, nn = 10 + rng() % 190;
            // quantized scores force plenty of ties
            for (size_t i = 0; i < np; ++i) pos.push_back(double(rng() % 20) / 4.0 + 0.5);
            for (size_t i = 0; i < nn; ++i) neg.push_back(double(rng() % 20) / 4.0);
            CHECK(auroc(pos, neg) == auroc_bruteforce(pos, neg));
        }
    }
    CHECK_THROWS_AS(auroc({}, {0.1}), DataError);
    CHECK_THROWS_AS(auroc({0.1}, {}), DataError);
}

TEST_CASE("tsne gradient matches finite differences") {
    std::mt19937_64 rng(11);
    Matrix pts(10, 3);
    for (auto& v : pts.data) v = oracle::random_vec(1, rng)[0];
    std::mt19937_64 arng(1);
    Matrix P = tsne_affinities(pts, 3.0, arng);

    Matrix y(10, 2);
    for (auto& v : y.data) v = oracle::random_vec(1, rng, 0.5)[0];

    Matrix grad;
    tsne_kl_grad(P, y, &grad);

    ArrayRefs params = {&y.data};
    auto fd = oracle::finite_diff([&]() { return tsne_kl_grad(P, y, nullptr); }, params, 1e-6);
    double worst = 0;
    for (size_t i = 0; i < grad.data.size(); ++i)
        worst = std::max(worst, oracle::rel_err(grad.data[i], fd[0][i]));
    CHECK(worst < 1e-4);
}

TEST_CASE("fused tsne iteration matches the reference objective") {
    std::mt19937_64 rng(41);
    Matrix pts(12, 4);
    for (auto& v : pts.data) v = oracle::random_vec(1, rng)[0];
    std::mt19937_64 arng(2);
    Matrix P = tsne_affinities(pts, 3.0, arng);
    Matrix y(12, 2);
    for (auto& v : y.data) v = oracle::random_vec(1, rng, 0.3)[0];

    Matrix fused_grad;
    const double fused_kl = tsne_iteration(P, 1.0, y, fused_grad);
    Matrix ref_grad;
    const double ref_kl = tsne_kl_grad(P, y, &ref_grad);
    CHECK(fused_kl == doctest::Approx(ref_kl).epsilon(1e-12));
    for (size_t k = 0; k < ref_grad.data.size(); ++k)
        CHECK(fused_grad.data[k] == doctest::Approx(ref_grad.data[k]).epsilon(1e-10));

    // exaggeration scales only the attractive term
    Matrix exag_grad;
    tsne_iteration(P, 4.0, y, exag_grad);
    Matrix Pex = P;
    for (auto& v : Pex.data) v *= 4.0;
    Matrix ref_exag;
    tsne_kl_grad(Pex, y, &ref_exag);
    for (size_t k = 0; k < ref_exag.data.size(); ++k)
        CHECK(exag_grad.data[k] == doctest::Approx(ref_exag.data[k]).epsilon(1e-10));
}

TEST_CASE("tsne reduces KL on random input") {
    std::mt19937_64 rng(13);
    Matrix pts(60, 5);
    for (auto& v : pts.data) v = oracle::random_vec(1, rng)[0];
    TsneConfig cfg;
    cfg.perplexity = 10.0;
    cfg.iters = 250;
    cfg.seed = 2;
    TsneResult res = tsne(pts, cfg);
    REQUIRE(res.kl_trace.size() == cfg.iters + 1);
    CHECK(res.kl_trace.back() < res.kl_trace.front());
    CHECK(res.y.rows == 60);
    CHECK(res.y.cols == 2);

    // deterministic for a fixed seed
    TsneResult res2 = tsne(pts, cfg);
    for (size_t i = 0; i < res.y.data.size(); ++i) CHECK(res.y.data[i] == res2.y.data[i]);
}

TEST_CASE("tsne separates two well-separated clusters") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 0.3);
    Matrix pts(120, 64);
    std::vector<int> labels(120);
    for (size_t i = 0; i < 120; ++i) {
        labels[i] = i < 60 ? 0 : 1;
        for (size_t j = 0; j < 64; ++j)
            pts(i, j) = n(rng) + (labels[i] == 0 ? 2.0 : -2.0) * (j % 3 == 0 ? 1.0 : 0.2);
    }
    TsneConfig cfg;
    cfg.perplexity = 20.0;
    cfg.iters = 400;
    cfg.seed = 3;
    TsneResult res = tsne(pts, cfg);
    CHECK(mean_silhouette(res.y, labels) > 0.5);
}

TEST_CASE("tsne tolerates exact duplicates via documented jitter") {
    std::mt19937_64 rng(19);
    Matrix pts(40, 3);
    for (size_t i = 0; i < 40; ++i) {
        const size_t src = i % 10;  // each point repeated four times
        for (size_t j = 0; j < 3; ++j) pts(i, j) = double(src * 3 + j);
    }
    TsneConfig cfg;
    cfg.perplexity = 5.0;
    cfg.iters = 50;
    // degenerate affinities: completion and finite output are the contract here
    TsneResult res = tsne(pts, cfg);
    CHECK(res.kl_trace.size() == cfg.iters + 1);
    for (double v : res.y.data) CHECK(std::isfinite(v));
    for (double v : res.kl_trace) CHECK(std::isfinite(v));
}

TEST_CASE("tsne preconditions") {
    Matrix pts(10, 2);
    TsneConfig cfg;
    cfg.perplexity = 30.0;
    CHECK_THROWS_AS(tsne(pts, cfg), ConfigError);
}

TEST_CASE("pca3_rgb") {
    SUBCASE("constant embeddings come out gray") {
        std::vector<Vec> embs(20, Vec{1.0, 2.0, 3.0, 4.0});
        std::vector<std::pair<double, double>> ll(20, {45.0, 7.0});
        auto rgb = pca3_rgb(embs, ll);
        REQUIRE(rgb.size() == 20);
        for (const auto& p : rgb) {
            CHECK(p.r == 0.5);
            CHECK(p.g == 0.5);
            CHECK(p.b == 0.5);
            CHECK(p.lat == 45.0);
        }
    }
    SUBCASE("components stay in [0,1] and rows align") {
        std::mt19937_64 rng(23);
        std::vector<Vec> embs;
        std::vector<std::pair<double, double>> ll;
        for (int i = 0; i < 50; ++i) {
            embs.push_back(oracle::random_vec(6, rng));
            ll.push_back({double(i), -double(i)});
        }
        auto rgb = pca3_rgb(embs, ll);
        REQUIRE(rgb.size() == 50);
        for (const auto& p : rgb) {
            CHECK(p.r >= 0.0);
            CHECK(p.r <= 1.0);
            CHECK(p.g >= 0.0);
            CHECK(p.g <= 1.0);
            CHECK(p.b >= 0.0);
            CHECK(p.b <= 1.0);
        }
        CHECK(rgb[7].lat == 7.0);
    }
    SUBCASE("an embedding jump shows up as the largest adjacent color step") {
        std::mt19937_64 rng(29);
        std::normal_distribution<double> n(0.0, 0.05);
        std::vector<Vec> embs;
        std::vector<std::pair<double, double>> ll;
        const size_t jump_at = 60;
        for (size_t i = 0; i < 120; ++i) {
            Vec e(5);
            for (size_t j = 0; j < 5; ++j)
                e[j] = (i < jump_at ? 1.0 : -1.0) * double(j + 1) * 0.4 + n(rng);
            embs.push_back(std::move(e));
            ll.push_back({0.0, 0.0});
        }
        auto rgb = pca3_rgb(embs, ll);
        size_t argmax = 0;
        double best = -1.0;
        for (size_t i = 1; i < rgb.size(); ++i) {
            const double d = std::abs(rgb[i].r - rgb[i - 1].r) +
                             std::abs(rgb[i].g - rgb[i - 1].g) +
                             std::abs(rgb[i].b - rgb[i - 1].b);
            if (d > best) {
                best = d;
                argmax = i;
            }
        }
        CHECK(argmax == jump_at);
    }
    SUBCASE("misaligned inputs are rejected") {
        CHECK_THROWS_AS(pca3_rgb({Vec{1.0}}, {}), DataError);
    }
}

TEST_CASE("hard_brake_experiment plumbing on a small fleet") {
    SynthConfig cfg;
    cfg.n_drivers = 2;
    cfg.sessions_per_driver = 1;
    cfg.session_s = 600.0;
    cfg.seed = 31;
    cfg.slam_rate_per_hour = 60.0;  // dense events for a small test
    FleetResult fleet = make_fleet(cfg);

    std::vector<const Session*> sessions;
    for (const auto& s : fleet.data.sessions) sessions.push_back(&s);
    Normalizer nz = Normalizer::fit(sessions, fleet.data.schema);

    ArchConfig arch{fleet.data.schema.dim(), 10, 12, 6};
    Drive2VecModel model = build_model(arch, 5, fleet.data.schema.hash());

    DetectorConfig det;
    HardBrakeResult res = hard_brake_experiment(sessions, fleet.data.schema, nz, model, det, 9);
    CHECK(res.n_events >= 5);
    CHECK(!res.pos_scores.empty());
    CHECK(!res.neg_scores.empty());
    CHECK(res.auroc_score >= 0.0);
    CHECK(res.auroc_score <= 1.0);
    CHECK(res.top_negatives.size() == 10);
    for (size_t i = 1; i < res.top_negatives.size(); ++i)
        CHECK(res.top_negatives[i - 1].score >= res.top_negatives[i].score);

    SUBCASE("fewer than 5 events is an error") {
        SynthConfig none = cfg;
        none.slam_rate_per_hour = 0.0;
        none.gas_slam_rate_per_hour = 0.0;
        FleetResult quiet = make_fleet(none);
        std::vector<const Session*> qs;
        for (const auto& s : quiet.data.sessions) qs.push_back(&s);
        Normalizer qnz = Normalizer::fit(qs, quiet.data.schema);
        CHECK_THROWS_AS(hard_brake_experiment(qs, quiet.data.schema, qnz, model, det, 9),
                        DataError);
    }
}
