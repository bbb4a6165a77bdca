#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"

namespace fgp {

/// Grid 0 = x_1 < ... < x_d = 1 containing 1/2.
class Partition {
public:
  Partition() = default;

  explicit Partition(std::vector<double> nodes) : x_(std::move(nodes)) {
    if (x_.size() < 3) {
      throw InputError("partition needs at least 3 nodes");
    }
    if (x_.front() != 0.0 || x_.back() != 1.0) {
      throw InputError("partition must start at 0 and end at 1");
    }
    half_ = x_.size();
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (i > 0 && !(x_[i] > x_[i - 1])) {
        throw InputError("partition nodes must be strictly increasing");
      }
      if (std::abs(x_[i] - 0.5) <= 1e-12) {
        x_[i] = 0.5;
        half_ = i;
      }
    }
    if (half_ == x_.size()) {
      throw InputError("partition must contain 1/2");
    }
    mesh_ = 0.0;
    min_mesh_ = 1.0;
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
      mesh_ = std::max(mesh_, spacing(i));
      min_mesh_ = std::min(min_mesh_, spacing(i));
    }
  }

  /// Uniform grid; d - 1 must be even so that 1/2 is a node.
  static Partition uniform(std::size_t d) {
    if (d < 3 || (d - 1) % 2 != 0) {
      throw InputError("uniform partition needs odd d >= 3, got " +
                       std::to_string(d));
    }
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = static_cast<double>(i) / static_cast<double>(d - 1);
    }
    x[(d - 1) / 2] = 0.5;
    return Partition(std::move(x));
  }

  /// Geometric clustering below 1/n (halving toward 0), uniform coverage of
  /// [1/n, 1], plus the nodes 0, 1/n, 1/2, 1 and any extra nodes requested.
  static Partition clustered(std::size_t n, std::size_t n_geometric,
                             std::size_t n_uniform,
                             const std::vector<double> &extra = {}) {
    if (n < 2) {
      throw InputError("clustered partition needs n >= 2");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> x{0.0, inv_n, 0.5, 1.0};
    double g = inv_n;
    for (std::size_t k = 0; k < n_geometric; ++k) {
      g *= 0.5;
      x.push_back(g);
    }
    for (std::size_t j = 1; j < n_uniform; ++j) {
      x.push_back(inv_n + (1.0 - inv_n) * static_cast<double>(j) /
                              static_cast<double>(n_uniform));
    }
    for (double e : extra) {
      if (e > 0.0 && e < 1.0) {
        x.push_back(e);
      }
    }
    std::sort(x.begin(), x.end());
    std::vector<double> out;
    for (double v : x) {
      if (out.empty() || v - out.back() > 1e-9) {
        out.push_back(v);
      } else if (v == 0.5 || v == inv_n) {
        out.back() = v;
      }
    }
    out.back() = 1.0;
    return Partition(std::move(out));
  }

  std::size_t size() const { return x_.size(); }
  const std::vector<double> &nodes() const { return x_; }
  double operator[](std::size_t i) const { return x_[i]; }
  double spacing(std::size_t i) const { return x_[i + 1] - x_[i]; }
  double mesh() const { return mesh_; }
  double min_mesh() const { return min_mesh_; }
  std::size_t half_index() const { return half_; }

  /// |delta - min delta| <= M * (min delta)^3
  bool almost_uniform(double M) const {
    return mesh_ - min_mesh_ <= M * min_mesh_ * min_mesh_ * min_mesh_;
  }

  /// Segment k with x_k <= x < x_{k+1}; the last segment also owns x = 1.
  std::size_t segment(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw InputError("evaluation point outside [0,1]: " + std::to_string(x));
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t k = static_cast<std::size_t>(it - x_.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, x_.size() - 2);
  }

  bool operator==(const Partition &o) const { return x_ == o.x_; }

private:
  std::vector<double> x_;
  double mesh_ = 0.0;
  double min_mesh_ = 0.0;
  std::size_t half_ = 0;
};

} // namespace fgp
