#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "retrace/features.hpp"
#include "retrace/simenv.hpp"
#include "retrace/util.hpp"

using namespace retrace;

namespace {

Image solid(int size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img(size, size);
    for (int row = 0; row < size; ++row)
        for (int col = 0; col < size; ++col) {
            img.at(row, col, 0) = r;
            img.at(row, col, 1) = g;
            img.at(row, col, 2) = b;
        }
    return img;
}

}  // namespace

TEST_CASE("uniform black image: all patches identical unit descriptors") {
    FeatureExtractor ex;
    Image img = solid(64, 0, 0, 0);
    PatchFeatures f = extract_features(img, ex);
    CHECK(f.grid == 8);
    CHECK(f.dim == FeatureExtractor::descriptor_dim);
    for (int i = 0; i < f.patch_count(); ++i) {
        double n2 = 0;
        for (int j = 0; j < f.dim; ++j) {
            n2 += f.patch(i)[j] * f.patch(i)[j];
            CHECK(f.patch(i)[j] == f.patch(0)[j]);
        }
        CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-6);
    }
}

TEST_CASE("identical images give identical features; rendering is supported input") {
    World w = reset("push-block", 0, RandomizationSpec::none());
    Image img = render(w);
    FeatureExtractor ex;
    PatchFeatures a = extract_features(img, ex);
    PatchFeatures b = extract_features(img, ex);
    CHECK(a.data == b.data);
}

TEST_CASE("64x64 with patch 8 gives an 8x8 grid; bad dims rejected") {
    FeatureExtractor ex;
    CHECK(extract_features(solid(64, 10, 20, 30), ex).grid == 8);
    Image odd(60, 60);
    CHECK_THROWS_AS(extract_features(odd, ex), std::invalid_argument);
}

TEST_CASE("avg cosine similarity: identity, negation, hand-built half case") {
    PatchFeatures a;
    a.grid = 1;
    a.dim = 2;
    a.data = {1.0, 0.0};
    PatchFeatures b = a;
    CHECK(avg_cosine_similarity(a, b) == 1.0);
    for (auto& v : b.data) v = -v;
    CHECK(avg_cosine_similarity(a, b) == -1.0);

    // four patches with dots 1, 0, 1, 0 -> mean 0.5
    PatchFeatures e, g;
    e.grid = 2;
    e.dim = 2;
    e.data = {1, 0, 1, 0, 1, 0, 1, 0};
    g = e;
    g.data = {1, 0, 0, 1, 1, 0, 0, 1};
    CHECK(avg_cosine_similarity(e, g) == 0.5);
}

TEST_CASE("similarity is symmetric exactly and shape mismatches throw") {
    World w = reset("peg", 0, RandomizationSpec::none());
    FeatureExtractor ex;
    PatchFeatures a = extract_features(render(w), ex);
    World moved = w;
    displace_object(moved, 0, 0.01, 0.004);
    PatchFeatures b = extract_features(render(moved), ex);
    CHECK(avg_cosine_similarity(a, b) == avg_cosine_similarity(b, a));

    FeatureExtractor ex16;
    ex16.patch_size = 16;
    PatchFeatures c = extract_features(render(w), ex16);
    CHECK_THROWS_AS(avg_cosine_similarity(a, c), std::invalid_argument);
}

TEST_CASE("check_env_disturbance: equal images never disturbed; default theta is 0.94") {
    CollectorConfig ccfg;
    CHECK(ccfg.theta == 0.94);
    World w = reset("push-block", 0, RandomizationSpec::none());
    Observation obs;
    obs.image = render(w);
    CHECK_FALSE(check_env_disturbance(obs, obs.image, 0.94, FeatureExtractor{}));
}

TEST_CASE("monotone degradation over the displacement grid {0,2,4,8,16} px") {
    FeatureExtractor ex;
    for (const char* id : {"push-block", "reach", "peg", "lid"}) {
        World w = reset(id, 0, RandomizationSpec::none());
        Image ref = render(w);
        PatchFeatures ref_f = extract_features(ref, ex);
        double m_per_px = 2.0 * w.cfg.view_half / w.cfg.image_size;
        double prev = 2.0;
        for (double d : {0.0, 2.0, 4.0, 8.0, 16.0}) {
            World moved = w;
            displace_object(moved, 0, d * m_per_px * 0.7071, d * m_per_px * 0.7071);
            double sim = avg_cosine_similarity(ref_f, extract_features(render(moved), ex));
            INFO(id, " d=", d, " sim=", sim);
            CHECK(sim <= prev + 1e-12);
            prev = sim;
        }
        CHECK(prev < 0.995);  // 16 px must be clearly detectable
    }
}

TEST_CASE("noise robustness: undisturbed noisy re-renders stay above the calibrated theta") {
    FeatureExtractor ex;
    CalibrationResult cal = calibrate_theta({"reach", "peg", "push-block", "lid"}, 25, ex, 7);
    CHECK(cal.zero_overlap);
    int ok = 0;
    World w = reset("push-block", 0, RandomizationSpec::none());
    PatchFeatures ref = extract_features(render(w), ex);
    for (int i = 0; i < 100; ++i) {
        double sim = avg_cosine_similarity(ref, extract_features(render(w, 1000 + i), ex));
        if (sim >= cal.theta) ++ok;
    }
    CHECK(ok >= 99);
}

TEST_CASE("calibration report CSV has one row per sample") {
    FeatureExtractor ex;
    CalibrationResult cal = calibrate_theta({"reach"}, 4, ex, 3);
    std::string csv = cal.to_csv();
    int lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 1 + 5 * 4);  // header + grid x pairs
    CHECK(csv.find("reach,") != std::string::npos);
}

TEST_CASE("external extractor hook routes through and back") {
    FeatureExtractor ex;
    ex.kind = ExtractorKind::External;
    CHECK_THROWS_AS(extract_features(solid(64, 1, 2, 3), ex), std::runtime_error);
    set_external_extractor([](const Image&, const FeatureExtractor&) {
        PatchFeatures f;
        f.grid = 1;
        f.dim = 1;
        f.data = {1.0};
        return f;
    });
    PatchFeatures f = extract_features(solid(64, 1, 2, 3), ex);
    CHECK(f.patch_count() == 1);
    set_external_extractor(nullptr);
}
