#include "retrace/features.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "retrace/simenv.hpp"
#include "retrace/util.hpp"

namespace retrace {

namespace {
ExternalExtractorFn g_external;

// Signed-gradient bins: below -0.05, within +-0.05, above. The wide center
// bin keeps seeded pixel noise (sigma ~0.02) from leaking into edge bins.
constexpr double kEdgeThresh = 0.05;

void gradient_bins(const Image& img, int r0, int c0, int p, bool horizontal, double* bins) {
    bins[0] = bins[1] = bins[2] = 0.0;
    int count = 0;
    for (int r = r0; r < r0 + p; ++r) {
        for (int c = c0; c < c0 + p; ++c) {
            int r2 = horizontal ? r : r + 1;
            int c2 = horizontal ? c + 1 : c;
            if (r2 >= r0 + p || c2 >= c0 + p) continue;
            double g1 = (img.intensity(r, c, 0) + img.intensity(r, c, 1) + img.intensity(r, c, 2)) / 3.0;
            double g2 = (img.intensity(r2, c2, 0) + img.intensity(r2, c2, 1) + img.intensity(r2, c2, 2)) / 3.0;
            double d = g2 - g1;
            if (d < -kEdgeThresh) bins[0] += 1.0;
            else if (d > kEdgeThresh) bins[2] += 1.0;
            else bins[1] += 1.0;
            ++count;
        }
    }
    if (count > 0) {
        bins[0] /= count;
        bins[1] /= count;
        bins[2] /= count;
    }
}
}  // namespace

void set_external_extractor(ExternalExtractorFn fn) { g_external = std::move(fn); }

PatchFeatures extract_features(const Image& img, const FeatureExtractor& ex) {
    if (ex.kind == ExtractorKind::External) {
        if (!g_external) throw std::runtime_error("external extractor not registered");
        return g_external(img, ex);
    }
    const int p = ex.patch_size;
    if (p <= 1 || img.width % p != 0 || img.height % p != 0) {
        throw std::invalid_argument("image dims must be divisible by patch size");
    }
    PatchFeatures out;
    out.grid = img.width / p;
    out.dim = FeatureExtractor::descriptor_dim;
    out.data.assign(static_cast<std::size_t>(out.grid) * out.grid * out.dim, 0.0);

    for (int pr = 0; pr < out.grid; ++pr) {
        for (int pc = 0; pc < out.grid; ++pc) {
            double* f = out.data.data() +
                        (static_cast<std::size_t>(pr) * out.grid + pc) * out.dim;
            const int r0 = pr * p, c0 = pc * p;
            for (int r = r0; r < r0 + p; ++r) {
                for (int c = c0; c < c0 + p; ++c) {
                    for (int ch = 0; ch < 3; ++ch) f[ch] += img.intensity(r, c, ch);
                }
            }
            for (int ch = 0; ch < 3; ++ch) f[ch] /= p * p;
            gradient_bins(img, r0, c0, p, true, f + 3);
            gradient_bins(img, r0, c0, p, false, f + 6);
            double n2 = 0.0;
            for (int i = 0; i < out.dim; ++i) n2 += f[i] * f[i];
            double n = std::sqrt(n2);
            if (n < 1e-12) {
                f[0] = 1.0;  // degenerate patch: fixed unit vector
            } else {
                for (int i = 0; i < out.dim; ++i) f[i] /= n;
            }
        }
    }
    return out;
}

double avg_cosine_similarity(const PatchFeatures& a, const PatchFeatures& b) {
    if (a.grid != b.grid || a.dim != b.dim) {
        throw std::invalid_argument("patch feature shape mismatch");
    }
    double sum = 0.0;
    for (int i = 0; i < a.patch_count(); ++i) {
        const double* pa = a.patch(i);
        const double* pb = b.patch(i);
        double d = 0.0;
        for (int j = 0; j < a.dim; ++j) d += pa[j] * pb[j];
        sum += d;
    }
    return sum / a.patch_count();
}

bool check_env_disturbance(const Observation& demo_obs, const Image& live, double theta,
                           const FeatureExtractor& ex) {
    double sim = avg_cosine_similarity(extract_features(demo_obs.image, ex),
                                       extract_features(live, ex));
    return sim < theta;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

std::string CalibrationResult::to_csv() const {
    std::ostringstream out;
    out << "scenario,displacement_px,similarity\n";
    for (const auto& r : rows) {
        out << r.scenario << "," << r.displacement_px << "," << r.similarity << "\n";
    }
    return out.str();
}

CalibrationResult calibrate_theta(const std::vector<std::string>& scenarios, int pairs_per_case,
                                  const FeatureExtractor& ex, std::uint64_t seed,
                                  double disturbed_px) {
    CalibrationResult res;
    const double grid_px[] = {0, 2, 4, 8, 16};
    Rng rng(seed);
    for (const auto& id : scenarios) {
        World base = reset(id, 0, RandomizationSpec::none());
        Image ref = render(base);
        PatchFeatures ref_f = extract_features(ref, ex);
        const double m_per_px = 2.0 * base.cfg.view_half / base.cfg.image_size;
        for (double d : grid_px) {
            for (int i = 0; i < pairs_per_case; ++i) {
                double ang = rng.uniform(0.0, 2.0 * kPi);
                World moved = base;
                if (d > 0) {
                    displace_object(moved, 0, std::cos(ang) * d * m_per_px,
                                    std::sin(ang) * d * m_per_px);
                }
                Image img = render(moved, rng.next_u64());
                double sim = avg_cosine_similarity(ref_f, extract_features(img, ex));
                res.rows.push_back({id, d, sim});
                if (d == 0.0) res.min_undisturbed = std::min(res.min_undisturbed, sim);
                if (d >= disturbed_px) res.max_disturbed = std::max(res.max_disturbed, sim);
            }
        }
    }
    res.zero_overlap = res.max_disturbed < res.min_undisturbed;
    res.theta = 0.5 * (res.min_undisturbed + res.max_disturbed);
    return res;
}

}  // namespace retrace
