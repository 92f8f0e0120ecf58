#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mogb/types.hpp"

namespace mogb {

namespace detail {

inline void check_same_dim(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
}

}  // namespace detail

/// Cosine distance is 1 - cos(a, b), in [0, 2]; euclidean is ||a - b||.
inline double distance(const Vector& a, const Vector& b, Metric metric) {
  detail::check_same_dim(a, b);
  if (metric == Metric::euclidean) return (a - b).norm();

  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine distance of a zero vector (degenerate embedding)");
  const double cos = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  // Exact self-distance even when rounding leaves cos a hair below 1.
  if (&a == &b || a == b) return 0.0;
  return 1.0 - cos;
}

/// Gradient of distance(z, o) with respect to z. Zero at z == o for euclidean.
inline Vector distance_gradient(const Vector& z, const Vector& o, Metric metric) {
  detail::check_same_dim(z, o);
  if (metric == Metric::euclidean) {
    const Vector diff = z - o;
    const double n = diff.norm();
    if (n == 0.0) return Vector::Zero(z.size());
    return diff / n;
  }
  const double nz = z.norm();
  const double no = o.norm();
  if (nz == 0.0 || no == 0.0)
    throw std::invalid_argument("cosine distance of a zero vector (degenerate embedding)");
  const double dot = z.dot(o);
  return -(o / (nz * no) - z * (dot / (nz * nz * nz * no)));
}

}  // namespace mogb
