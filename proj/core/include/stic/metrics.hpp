#ifndef STIC_METRICS_HPP
#define STIC_METRICS_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stic/dataset.hpp"
#include "stic/model.hpp"
#include "stic/sampler.hpp"

namespace stic {

/// A set of feature vectors from one source ("real" or "generated"), one row
/// per sample. Labels are optional and unused by the moment-based metrics.
struct FeatureCloud {
  std::vector<std::vector<double>> rows;
  std::string source;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
  void validate() const;  // e.g. rejects ragged rows and non-finite entries
};

/// Penultimate-layer features of every sample in `data`, extracted with
/// `model` (pixel datasets are mapped to [-1,1] first, no noise).
FeatureCloud extract_features(const ClassifierModel& model, const Dataset& data,
                              const std::string& source);

/// Trains a fresh classifier from `template_spec` on `train_set` and returns
/// top-1 accuracy percent on `test_set`. Classes present in the test set but
/// absent from the training set are excluded with a warning pushed to
/// `warnings`. Deterministic for a fixed rng.
double cls_cross(const Dataset& train_set, const Dataset& test_set, ModelSpec template_spec,
                 int epochs, Rng rng, std::vector<std::string>* warnings = nullptr);

/// Distance between Gaussians fitted to the two clouds:
///   ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)).
/// Covariances are the unbiased sample estimates; the matrix square root uses
/// a symmetric eigendecomposition with eigenvalues floored at zero. A
/// near-singular covariance gets a 1e-6 ridge and a notice.
double frechet_distance(const FeatureCloud& a, const FeatureCloud& b,
                        std::vector<std::string>* notices = nullptr);

struct KnnResult {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision: fraction of generated points lying inside the union of balls
/// centred at real points with radius = distance to the k-th nearest other
/// real point. Recall swaps the roles. Boundary hits count (<= comparison),
/// so identical clouds score 1/1 even with zero radii. Requires k < size of
/// both clouds.
KnnResult knn_precision_recall(const FeatureCloud& real, const FeatureCloud& gen, int k);

struct DiversityReport {
  double near_mean_distance = 0.0;  // mean pairwise L2, chains started near one base point
  double far_mean_distance = 0.0;   // same, chains started independently
  int near_failures = 0;
  int far_failures = 0;
};

/// Synthesizes `chains` samples for `target_class` twice: once from starts in
/// a sigma-neighborhood of a common base point, once from independent
/// Gaussian starts, and reports the mean pairwise distance of the end states
/// of each group. No style anchor is used.
DiversityReport diversity_report(const ClassifierModel& model, int target_class, int chains,
                                 double sigma, const SamplerConfig& config, Rng rng);

/// Appends rows "run,metric,value" to a CSV metrics log, writing the header
/// first when the stream is at its beginning.
void append_metrics_csv(std::ostream& os, const std::string& run_id,
                        const std::vector<std::pair<std::string, double>>& values);

}  // namespace stic

#endif  // STIC_METRICS_HPP
