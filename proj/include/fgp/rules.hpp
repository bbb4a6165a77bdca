#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "genfun.hpp"
#include "generator.hpp"
#include "simplex.hpp"

namespace fgp {

/// Maps current market weights to target portfolio weights.
class WeightRule {
public:
  enum class Kind { generated, market, equal, diversity, index_tracking };

  static WeightRule market() { return WeightRule(Kind::market); }
  static WeightRule equal() { return WeightRule(Kind::equal); }
  static WeightRule index_tracking() {
    return WeightRule(Kind::index_tracking);
  }

  /// pi_i proportional to p_i^theta, theta < 1.
  static WeightRule diversity(double theta) {
    if (!(theta < 1.0)) {
      throw InputError("diversity rule needs theta < 1");
    }
    WeightRule r(Kind::diversity);
    r.theta_ = theta;
    return r;
  }

  static WeightRule generated(GenVector g) {
    WeightRule r(Kind::generated);
    r.gv_ = std::make_shared<const GenVector>(std::move(g));
    return r;
  }

  static WeightRule generated(AnalyticGenerator g) {
    WeightRule r(Kind::generated);
    r.ag_ = std::make_shared<const AnalyticGenerator>(std::move(g));
    return r;
  }

  Kind kind() const { return kind_; }
  double theta() const { return theta_; }

  std::string name() const {
    switch (kind_) {
    case Kind::generated:
      return ag_ ? "generated:" + ag_->label() : "generated";
    case Kind::market:
      return "market";
    case Kind::equal:
      return "equal";
    case Kind::diversity:
      return "diversity";
    case Kind::index_tracking:
      return "index_tracking";
    }
    return "";
  }

  WeightVector apply(const WeightVector &p) const {
    switch (kind_) {
    case Kind::market:
    case Kind::index_tracking:
      return p;
    case Kind::equal:
      return WeightVector::uniform(p.size());
    case Kind::diversity: {
      std::vector<double> w(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        w[i] = std::pow(p[i], theta_);
      }
      return WeightVector::normalized(w);
    }
    case Kind::generated:
      return gv_ ? portfolio_map(*gv_, p) : portfolio_map(*ag_, p);
    }
    return p;
  }

private:
  explicit WeightRule(Kind k) : kind_(k) {}

  Kind kind_;
  double theta_ = 0.5;
  std::shared_ptr<const GenVector> gv_;
  std::shared_ptr<const AnalyticGenerator> ag_;
};

} // namespace fgp
