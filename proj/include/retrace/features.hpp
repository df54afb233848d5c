#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retrace/demo.hpp"
#include "retrace/image.hpp"

namespace retrace {

/// P x P grid of unit-norm patch descriptors.
struct PatchFeatures {
    int grid = 0;  // P
    int dim = 0;   // F
    std::vector<double> data;  // grid*grid rows of dim values

    const double* patch(int i) const { return data.data() + static_cast<std::size_t>(i) * dim; }
    int patch_count() const { return grid * grid; }
};

enum class ExtractorKind { PatchDescriptor, External };

/// The default extractor is a hand-crafted patch descriptor: per patch, the
/// channel means concatenated with 3-bin horizontal and vertical gradient
/// histograms, L2-normalized.  `External` routes through a registered hook so
/// a heavier backbone can be swapped in without touching callers.
struct FeatureExtractor {
    ExtractorKind kind = ExtractorKind::PatchDescriptor;
    int patch_size = 8;
    static constexpr int descriptor_dim = 9;  // 3 means + 3 + 3 histogram bins
};

using ExternalExtractorFn = std::function<PatchFeatures(const Image&, const FeatureExtractor&)>;
void set_external_extractor(ExternalExtractorFn fn);

/// Throws std::invalid_argument when image dims are not divisible by the
/// patch size.
PatchFeatures extract_features(const Image& img, const FeatureExtractor& ex);

/// Mean over corresponding patches of descriptor dot products; in [-1, 1].
/// Throws std::invalid_argument on grid/dim mismatch.
double avg_cosine_similarity(const PatchFeatures& a, const PatchFeatures& b);

/// True iff the average similarity between the demo observation's image and
/// the live image falls below theta.
bool check_env_disturbance(const Observation& demo_obs, const Image& live, double theta,
                           const FeatureExtractor& ex);

// ---------------------------------------------------------------------------
// Threshold calibration
// ---------------------------------------------------------------------------

struct CalibrationRow {
    std::string scenario;
    double displacement_px = 0.0;
    double similarity = 0.0;
};

struct CalibrationResult {
    double theta = 0.94;
    double min_undisturbed = 1.0;   // over noisy undisturbed renders
    double max_disturbed = -1.0;    // over displacements >= disturbed_px
    bool zero_overlap = false;
    std::vector<CalibrationRow> rows;

    std::string to_csv() const;
};

/// Render disturbed/undisturbed pairs per scenario over the displacement
/// grid {0,2,4,8,16} px and pick theta at the midpoint of the separation
/// margin between noisy undisturbed renders and displacements >=
/// disturbed_px.  Deterministic given seed.
CalibrationResult calibrate_theta(const std::vector<std::string>& scenarios, int pairs_per_case,
                                  const FeatureExtractor& ex, std::uint64_t seed,
                                  double disturbed_px = 8.0);

}  // namespace retrace
