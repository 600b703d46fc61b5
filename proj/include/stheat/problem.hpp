#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

// kappa(rho) = kappa_min + (kappa_max - kappa_min) rho^p
struct MaterialModel {
  double kappa_min = 1e-3;
  double kappa_max = 1.0;
  double p = 3.0;

  void validate() const {
    if (!(kappa_min >= 0.0)) throw InvalidArgument("MaterialModel: kappa_min must be >= 0");
    // kappa_max == kappa_min is allowed: the design then has no effect.
    if (!(kappa_max >= kappa_min)) throw InvalidArgument("MaterialModel: kappa_max must be >= kappa_min");
    if (!(p >= 1.0)) throw InvalidArgument("MaterialModel: penalization exponent must be >= 1");
  }
};

namespace detail {

inline double checked_density(double rho) {
  constexpr double slack = 1e-12;
  if (!std::isfinite(rho) || rho < -slack || rho > 1.0 + slack) {
    throw InvalidArgument("density " + std::to_string(rho) + " outside [0, 1]");
  }
  return std::clamp(rho, 0.0, 1.0);
}

}  // namespace detail

inline double kappa(double rho, const MaterialModel& m) {
  const double r = detail::checked_density(rho);
  return m.kappa_min + (m.kappa_max - m.kappa_min) * std::pow(r, m.p);
}

inline double dkappa_drho(double rho, const MaterialModel& m) {
  const double r = detail::checked_density(rho);
  if (m.p == 1.0) return m.kappa_max - m.kappa_min;
  return m.p * (m.kappa_max - m.kappa_min) * std::pow(r, m.p - 1.0);
}

inline Vector kappa(const Vector& rho, const MaterialModel& m) {
  Vector out(rho.size());
  for (Index k = 0; k < rho.size(); ++k) out(k) = kappa(rho(k), m);
  return out;
}

inline Vector dkappa_drho(const Vector& rho, const MaterialModel& m) {
  Vector out(rho.size());
  for (Index k = 0; k < rho.size(); ++k) out(k) = dkappa_drho(rho(k), m);
  return out;
}

struct DesignField {
  Vector rho;
  Vector element_volumes;
  double volume_bound = 0.0;

  double volume() const { return rho.dot(element_volumes); }
  bool feasible(double tol = 1e-9) const {
    return rho.size() == element_volumes.size() && rho.minCoeff() >= -tol &&
           rho.maxCoeff() <= 1.0 + tol && volume() <= volume_bound + tol;
  }
  // Uniform design that exactly fills the volume bound (capped at 1).
  static DesignField uniform(const Vector& volumes, double volume_bound) {
    const double fill = std::min(1.0, volume_bound / volumes.sum());
    return {Vector::Constant(volumes.size(), fill), volumes, volume_bound};
  }
};

enum class BoundaryKind { dirichlet, neumann };

// Dirichlet data is the boundary temperature; Neumann data is the flux kappa*u_x.
struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::dirichlet;
  std::function<double(double t)> data = [](double) { return 0.0; };
};

// Source f(x, t); the element index lets manufactured sources carry the
// per-element diffusivity, since f may jump across interfaces.
using SourceFunction = std::function<double(double x, double t, std::size_t element)>;

struct ProblemSpec {
  double x_left = 0.0;
  double x_right = 1.0;
  double final_time = 1.0;
  std::size_t elements = 1;
  int nx_nodes = 5;  // LGL nodes per element in space
  int nt_nodes = 5;  // LGL nodes in time (one temporal element)
  std::vector<double> edges;  // optional explicit partition, size elements + 1

  BoundaryCondition west;
  BoundaryCondition east;
  std::function<double(double x)> initial = [](double) { return 0.0; };
  SourceFunction source = [](double, double, std::size_t) { return 0.0; };
  MaterialModel material;

  std::vector<double> element_edges() const {
    if (!edges.empty()) return edges;
    std::vector<double> out(elements + 1);
    for (std::size_t k = 0; k <= elements; ++k) {
      out[k] = x_left + (x_right - x_left) * static_cast<double>(k) / static_cast<double>(elements);
    }
    out.back() = x_right;
    return out;
  }

  Vector element_lengths() const {
    const auto e = element_edges();
    Vector v(static_cast<Index>(elements));
    for (std::size_t k = 0; k < elements; ++k) v(static_cast<Index>(k)) = e[k + 1] - e[k];
    return v;
  }

  void validate() const {
    if (elements < 1) throw InvalidArgument("ProblemSpec: need at least one element");
    if (!(x_left < x_right)) throw InvalidArgument("ProblemSpec: empty spatial domain");
    if (!(final_time > 0.0)) throw InvalidArgument("ProblemSpec: final time must be positive");
    if (nx_nodes < 2 || nt_nodes < 2) throw InvalidArgument("ProblemSpec: need >= 2 nodes per direction");
    if (!edges.empty()) {
      if (edges.size() != elements + 1) throw InvalidArgument("ProblemSpec: edges size != elements + 1");
      for (std::size_t k = 0; k < elements; ++k) {
        if (!(edges[k] < edges[k + 1])) throw InvalidArgument("ProblemSpec: edges must increase");
      }
      if (edges.front() != x_left || edges.back() != x_right) {
        throw InvalidArgument("ProblemSpec: edges must span [x_left, x_right]");
      }
    }
    if (!west.data || !east.data || !initial || !source) {
      throw InvalidArgument("ProblemSpec: data functions must be set");
    }
    material.validate();
  }
};

}  // namespace stheat
