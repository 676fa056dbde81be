#include "stic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "stic/ops.hpp"
#include "stic/trainer.hpp"

namespace stic {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric d x d matrix (row-major).
// Small feature widths only, so the O(d^3) sweeps are fine.
struct SymmetricEigen {
  std::vector<double> values;   // unordered
  std::vector<double> vectors;  // row-major, column j = eigenvector of values[j]
};

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t d) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  double frob = 0.0;
  for (double x : a) frob += x * x;
  const double stop = 1e-24 * std::max(frob, 1.0);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    }
    if (off <= stop) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double apq = a[p * d + q];
        if (apq == 0.0) continue;
        double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double app = a[p * d + p];
        double aqq = a[q * d + q];
        a[p * d + p] = app - t * apq;
        a[q * d + q] = aqq + t * apq;
        a[p * d + q] = 0.0;
        a[q * d + p] = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          if (i == p || i == q) continue;
          double aip = a[i * d + p];
          double aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[p * d + i] = a[i * d + p];
          a[i * d + q] = s * aip + c * aiq;
          a[q * d + i] = a[i * d + q];
        }
        for (std::size_t i = 0; i < d; ++i) {
          double vip = v[i * d + p];
          double viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }
  SymmetricEigen out;
  out.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.values[i] = a[i * d + i];
  out.vectors = std::move(v);
  return out;
}

std::vector<double> matmul_sq(const std::vector<double>& a, const std::vector<double>& b,
                              std::size_t d) {
  std::vector<double> c(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double aik = a[i * d + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) c[i * d + j] += aik * b[k * d + j];
    }
  }
  return c;
}

struct Moments {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major d x d, unbiased
};

Moments fit_moments(const FeatureCloud& cloud) {
  std::size_t n = cloud.size();
  std::size_t d = cloud.dim();
  Moments m;
  m.mean.assign(d, 0.0);
  for (const auto& row : cloud.rows) {
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += row[j];
  }
  for (double& x : m.mean) x /= static_cast<double>(n);
  m.cov.assign(d * d, 0.0);
  for (const auto& row : cloud.rows) {
    for (std::size_t i = 0; i < d; ++i) {
      double di = row[i] - m.mean[i];
      for (std::size_t j = i; j < d; ++j) m.cov[i * d + j] += di * (row[j] - m.mean[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      m.cov[i * d + j] /= static_cast<double>(n - 1);
      m.cov[j * d + i] = m.cov[i * d + j];
    }
  }
  return m;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

// Squared radius to the k-th nearest other point, per point.
std::vector<double> knn_sq_radii(const FeatureCloud& cloud, int k) {
  std::size_t n = cloud.size();
  std::vector<double> radii(n);
  std::vector<double> dists;
  dists.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dists.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dists.push_back(sq_dist(cloud.rows[i], cloud.rows[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    radii[i] = dists[k - 1];
  }
  return radii;
}

double coverage(const FeatureCloud& candidates, const FeatureCloud& hosts,
                const std::vector<double>& host_sq_radii) {
  std::size_t inside = 0;
  for (const auto& c : candidates.rows) {
    for (std::size_t i = 0; i < hosts.size(); ++i) {
      if (sq_dist(c, hosts.rows[i]) <= host_sq_radii[i]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(candidates.size());
}

Tensor model_input(const Dataset& data, std::size_t index) {
  Tensor raw = data.sample_tensor(index);
  if (!data.pixel_domain) return raw;
  Rng none(0);
  return preprocess(raw, 0.0, none);
}

double mean_pairwise_distance(const std::vector<Tensor>& states) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < states[i].numel(); ++k) {
        double diff = states[i].at(k) - states[j].at(k);
        s += diff * diff;
      }
      total += std::sqrt(s);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace

void FeatureCloud::validate() const {
  if (rows.size() < 2) {
    throw std::invalid_argument("feature cloud '" + source + "': need at least 2 rows, have " +
                                std::to_string(rows.size()));
  }
  std::size_t d = rows.front().size();
  if (d == 0) throw std::invalid_argument("feature cloud '" + source + "': zero-width rows");
  for (const auto& row : rows) {
    if (row.size() != d) {
      throw std::invalid_argument("feature cloud '" + source + "': ragged rows");
    }
    for (double x : row) {
      if (!std::isfinite(x)) {
        throw std::invalid_argument("feature cloud '" + source + "': non-finite entry");
      }
    }
  }
  if (!labels.empty() && labels.size() != rows.size()) {
    throw std::invalid_argument("feature cloud '" + source + "': label count mismatch");
  }
}

FeatureCloud extract_features(const ClassifierModel& model, const Dataset& data,
                              const std::string& source) {
  data.validate();
  FeatureCloud cloud;
  cloud.source = source;
  cloud.labels = data.labels;
  cloud.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor f = model.forward_trace(model_input(data, i)).penultimate;
    cloud.rows.emplace_back(f.data().begin(), f.data().end());
  }
  return cloud;
}

double cls_cross(const Dataset& train_set, const Dataset& test_set, ModelSpec template_spec,
                 int epochs, Rng rng, std::vector<std::string>* warnings) {
  train_set.validate();
  test_set.validate();
  if (train_set.num_classes != test_set.num_classes) {
    throw std::invalid_argument("cls_cross: train and test class counts differ");
  }
  if (train_set.sample_shape != test_set.sample_shape) {
    throw std::invalid_argument("cls_cross: train and test sample shapes differ");
  }
  if (epochs < 1) throw std::invalid_argument("cls_cross: epochs must be >= 1");

  int num_classes = train_set.num_classes;
  template_spec.input_shape = train_set.sample_shape;
  template_spec.num_real_classes = num_classes;
  Rng init_rng = rng.fork(0x637201);
  ClassifierModel model(template_spec, init_rng);

  std::vector<char> present(num_classes, 0);
  for (int label : train_set.labels) present[label] = 1;

  Rng order_rng = rng.fork(0x637202);
  Adam opt;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = 32;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::size_t end = std::min(start + batch, order.size());
      Tensor loss;
      for (std::size_t i = start; i < end; ++i) {
        std::size_t idx = order[i];
        Tensor logits = model.forward_logits(model_input(train_set, idx));
        Tensor term = cross_entropy_soft(logits, one_hot(train_set.labels[idx], num_classes + 1));
        loss = loss.defined() ? add(loss, term) : term;
      }
      loss = scalar_mul(loss, 1.0 / static_cast<double>(end - start));
      backward(loss);
      opt.step(model.parameters(), 1e-3);
      model.zero_grads();
    }
  }

  std::size_t excluded = 0;
  std::size_t counted = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    int label = test_set.labels[i];
    if (!present[label]) {
      ++excluded;
      continue;
    }
    Tensor logits = model.forward_logits(model_input(test_set, i));
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (logits.at(c) > logits.at(best)) best = c;
    }
    ++counted;
    if (best == label) ++correct;
  }
  if (excluded > 0 && warnings) {
    warnings->push_back("cls_cross: excluded " + std::to_string(excluded) +
                        " test samples whose class never appears in the training set");
  }
  if (counted == 0) {
    throw std::runtime_error("cls_cross: no test samples left after class exclusion");
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

double frechet_distance(const FeatureCloud& a, const FeatureCloud& b,
                        std::vector<std::string>* notices) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("frechet_distance: dimension mismatch, " +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  std::size_t d = a.dim();
  Moments ma = fit_moments(a);
  Moments mb = fit_moments(b);

  auto regularize = [&](Moments& m, const std::string& source) -> SymmetricEigen {
    SymmetricEigen eig = jacobi_eigen(m.cov, d);
    double lo = *std::min_element(eig.values.begin(), eig.values.end());
    double hi = *std::max_element(eig.values.begin(), eig.values.end());
    if (lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      for (std::size_t i = 0; i < d; ++i) m.cov[i * d + i] += 1e-6;
      for (double& v : eig.values) v += 1e-6;
      if (notices) {
        notices->push_back("frechet_distance: covariance of '" + source +
                           "' cloud is near-singular; added 1e-6 ridge");
      }
    }
    return eig;
  };
  SymmetricEigen ea = regularize(ma, a.source);
  regularize(mb, b.source);

  // sqrt(Sa) from the eigendecomposition, eigenvalues floored at zero
  std::vector<double> sqrt_a(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = std::sqrt(std::max(ea.values[j], 0.0));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        sqrt_a[i * d + k] += ea.vectors[i * d + j] * s * ea.vectors[k * d + j];
      }
    }
  }

  // tr((Sa Sb)^(1/2)) = tr((sqrt(Sa) Sb sqrt(Sa))^(1/2)), which is symmetric PSD
  std::vector<double> m = matmul_sq(matmul_sq(sqrt_a, mb.cov, d), sqrt_a, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      double avg = 0.5 * (m[i * d + j] + m[j * d + i]);
      m[i * d + j] = avg;
      m[j * d + i] = avg;
    }
  }
  SymmetricEigen em = jacobi_eigen(std::move(m), d);
  double tr_sqrt = 0.0;
  for (double v : em.values) tr_sqrt += std::sqrt(std::max(v, 0.0));

  double mean_term = sq_dist(ma.mean, mb.mean);
  double tr_a = 0.0;
  double tr_b = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    tr_a += ma.cov[i * d + i];
    tr_b += mb.cov[i * d + i];
  }
  return std::max(mean_term + tr_a + tr_b - 2.0 * tr_sqrt, 0.0);
}

KnnResult knn_precision_recall(const FeatureCloud& real, const FeatureCloud& gen, int k) {
  real.validate();
  gen.validate();
  if (real.dim() != gen.dim()) {
    throw std::invalid_argument("knn_precision_recall: dimension mismatch");
  }
  if (k < 1 || static_cast<std::size_t>(k) >= real.size() ||
      static_cast<std::size_t>(k) >= gen.size()) {
    throw std::invalid_argument("knn_precision_recall: need 1 <= k < size of both clouds");
  }
  KnnResult out;
  out.precision = coverage(gen, real, knn_sq_radii(real, k));
  out.recall = coverage(real, gen, knn_sq_radii(gen, k));
  return out;
}

DiversityReport diversity_report(const ClassifierModel& model, int target_class, int chains,
                                 double sigma, const SamplerConfig& config, Rng rng) {
  if (chains < 2) throw std::invalid_argument("diversity_report: need at least 2 chains");
  if (sigma < 0.0) throw std::invalid_argument("diversity_report: sigma must be >= 0");
  if (target_class < 0 || target_class >= model.num_logits()) {
    throw std::invalid_argument("diversity_report: target class out of range");
  }

  Rng start_rng = rng.fork(0xd1f1);
  Tensor base = random_normal(model.spec().input_shape, start_rng);
  std::vector<Tensor> near_starts = neighborhood_starts(base, sigma, chains, start_rng);
  std::vector<Tensor> far_starts;
  far_starts.reserve(chains);
  for (int i = 0; i < chains; ++i) {
    far_starts.push_back(random_normal(model.spec().input_shape, start_rng));
  }

  Tensor target = one_hot(target_class, model.num_logits());
  GramTarget no_style;
  SamplerConfig chain_config = config;
  chain_config.init = SamplerConfig::Init::kGiven;  // starts are prepared above
  auto run_group = [&](const std::vector<Tensor>& starts, std::uint64_t tag, int& failures) {
    std::vector<Tensor> finals;
    finals.reserve(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) {
      SynthesisResult r = synthesize(model, target, target_class, no_style, chain_config,
                                     rng.fork(tag + i), starts[i]);
      if (r.chain.failed) ++failures;
      finals.push_back(r.chain.state);
    }
    return finals;
  };

  DiversityReport report;
  std::vector<Tensor> near_finals = run_group(near_starts, 0x4e000000ULL, report.near_failures);
  std::vector<Tensor> far_finals = run_group(far_starts, 0x46000000ULL, report.far_failures);
  report.near_mean_distance = mean_pairwise_distance(near_finals);
  report.far_mean_distance = mean_pairwise_distance(far_finals);
  return report;
}

void append_metrics_csv(std::ostream& os, const std::string& run_id,
                        const std::vector<std::pair<std::string, double>>& values) {
  if (os.tellp() == std::streampos(0)) os << "run,metric,value\n";
  os << std::setprecision(17);
  for (const auto& [name, value] : values) {
    os << run_id << ',' << name << ',' << value << '\n';
  }
}

}  // namespace stic
