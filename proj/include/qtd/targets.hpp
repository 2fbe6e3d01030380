#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "qtd/error.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/rng.hpp"

namespace qtd {

/// Mixture of isotropic Gaussians in R^d.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Point> means, std::vector<double> sds)
      : weights_(std::move(weights)), means_(std::move(means)), sds_(std::move(sds)) {
    if (weights_.empty()) throw InvalidArgument("GaussianMixture: no components");
    if (means_.size() != weights_.size() || sds_.size() != weights_.size())
      throw InvalidArgument("GaussianMixture: weights, means and sds must have equal length");
    d_ = means_.front().size();
    if (d_ == 0) throw InvalidArgument("GaussianMixture: zero-dimensional means");
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (!(weights_[k] > 0.0)) throw InvalidArgument("GaussianMixture: weights must be positive");
      if (!(sds_[k] > 0.0)) throw InvalidArgument("GaussianMixture: sds must be positive");
      if (means_[k].size() != d_) throw InvalidArgument("GaussianMixture: means of differing dimension");
      total += weights_[k];
    }
    for (double& w : weights_) w /= total;
    cumulative_.resize(weights_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) cumulative_[k] = acc += weights_[k];
  }

  std::size_t dim() const noexcept { return d_; }

  double pdf(std::span<const double> x) const {
    if (x.size() != d_) throw InvalidArgument("GaussianMixture::pdf: dimension mismatch");
    double p = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      double r2 = 0.0;
      for (std::size_t j = 0; j < d_; ++j) {
        const double z = (x[j] - means_[k][j]) / sds_[k];
        r2 += z * z;
      }
      const double norm = std::pow(2.0 * std::numbers::pi * sds_[k] * sds_[k], -0.5 * static_cast<double>(d_));
      p += weights_[k] * norm * std::exp(-0.5 * r2);
    }
    return p;
  }

  Density density() const {
    return [self = *this](std::span<const double> x) { return self.pdf(x); };
  }

  Point sample(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::size_t k = 0;
    while (k + 1 < cumulative_.size() && u >= cumulative_[k]) ++k;
    std::normal_distribution<double> z(0.0, 1.0);
    Point x(d_);
    for (std::size_t j = 0; j < d_; ++j) x[j] = means_[k][j] + sds_[k] * z(rng);
    return x;
  }

  std::vector<Point> sample(std::size_t n, Rng& rng) const {
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
    return out;
  }

 private:
  std::vector<double> weights_;
  std::vector<Point> means_;
  std::vector<double> sds_;
  std::vector<double> cumulative_;
  std::size_t d_ = 0;
};

}  // namespace qtd
