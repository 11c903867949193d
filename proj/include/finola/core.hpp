#pragma once

#include "finola/types.hpp"

#include <functional>
#include <string>

namespace finola {

enum class Ordering { h_first, v_first, averaged };
enum class StepDir { right, left, down, up };

inline const char* to_string(Ordering o) {
  switch (o) {
    case Ordering::h_first: return "h_first";
    case Ordering::v_first: return "v_first";
    default: return "averaged";
  }
}

template <class Scalar>
NormContextT<Scalar> channel_stats(const Vector<Scalar>& v) {
  const Scalar mean = v.mean();
  const Scalar var = (v.array() - mean).square().sum() / Scalar(v.size());
  using std::sqrt;
  return {mean, sqrt(var)};
}

/// Channel normalization of one position: (v − μ)/(σ + ε) with μ, σ taken
/// over the C channels.
template <class Scalar>
Vector<Scalar> normalize_channels(const Vector<Scalar>& v, Scalar epsilon) {
  if (v.size() < 2)
    throw ShapeMismatchError("normalize_channels: need at least 2 channels, got " +
                             std::to_string(v.size()));
  const auto stats = channel_stats<Scalar>(v);
  return (v.array() - stats.mean).matrix() / (stats.std + epsilon);
}

template <class Scalar>
const Matrix<Scalar>& direction_matrix(const FinolaParamsT<Scalar>& p, StepDir dir) {
  switch (dir) {
    case StepDir::right: return p.A;
    case StepDir::left: return p.A_minus;
    case StepDir::down: return p.B;
    default: return p.B_minus;
  }
}

/// One norm+linear autoregression step: z + M_dir · normalize_channels(z).
template <class Scalar>
Vector<Scalar> step(const Vector<Scalar>& z, StepDir dir, const FinolaParamsT<Scalar>& p) {
  return z + direction_matrix(p, dir) * normalize_channels<Scalar>(z, p.epsilon);
}

namespace detail {

template <class Scalar>
void check_position(GridPos pos, int width, int height) {
  if (pos.x < 0 || pos.x >= width || pos.y < 0 || pos.y >= height)
    throw PositionOutOfRangeError("position (" + std::to_string(pos.x) + "," +
                                  std::to_string(pos.y) + ") outside " + std::to_string(width) +
                                  "x" + std::to_string(height) + " grid");
}

/// Fills one row of `map` from the seed at x0: right steps to the end, then
/// left steps back to column 0.
template <class Scalar>
void fill_row(FeatureMapT<Scalar>& map, int y, int x0, const FinolaParamsT<Scalar>& p) {
  for (int x = x0; x + 1 < map.width; ++x)
    map.at(x + 1, y) = step<Scalar>(map.at(x, y), StepDir::right, p);
  for (int x = x0; x >= 1; --x)
    map.at(x - 1, y) = step<Scalar>(map.at(x, y), StepDir::left, p);
}

template <class Scalar>
void fill_column(FeatureMapT<Scalar>& map, int x, int y0, const FinolaParamsT<Scalar>& p) {
  for (int y = y0; y + 1 < map.height; ++y)
    map.at(x, y + 1) = step<Scalar>(map.at(x, y), StepDir::down, p);
  for (int y = y0; y >= 1; --y)
    map.at(x, y - 1) = step<Scalar>(map.at(x, y), StepDir::up, p);
}

template <class Scalar>
FeatureMapT<Scalar> propagate_single(const Vector<Scalar>& q, GridPos pos,
                                     const FinolaParamsT<Scalar>& p, int width, int height,
                                     Ordering ordering) {
  check_position<Scalar>(pos, width, height);
  const int c = static_cast<int>(q.size());
  if (ordering == Ordering::averaged) {
    FeatureMapT<Scalar> h = propagate_single<Scalar>(q, pos, p, width, height, Ordering::h_first);
    const FeatureMapT<Scalar> v = propagate_single<Scalar>(q, pos, p, width, height, Ordering::v_first);
    h.data = Scalar(0.5) * (h.data + v.data);
    return h;
  }
  FeatureMapT<Scalar> map(width, height, c);
  map.at(pos.x, pos.y) = q;
  if (ordering == Ordering::h_first) {
    fill_row<Scalar>(map, pos.y, pos.x, p);
    for (int x = 0; x < width; ++x) fill_column<Scalar>(map, x, pos.y, p);
  } else {
    fill_column<Scalar>(map, pos.x, pos.y, p);
    for (int y = 0; y < height; ++y) fill_row<Scalar>(map, y, pos.x, p);
  }
  return map;
}

}  // namespace detail

/// Generates a full W×H map from a single latent. h_first seeds the latent's
/// row and grows every column from it; v_first is the transpose scheme;
/// averaged is the elementwise mean of the two.
template <class Scalar>
FeatureMapT<Scalar> propagate(const LatentSetT<Scalar>& q_set, const FinolaParamsT<Scalar>& p,
                              int width, int height, Ordering ordering) {
  if (q_set.paths() != 1)
    throw ShapeMismatchError("propagate: expected a single path, got " +
                             std::to_string(q_set.paths()));
  return detail::propagate_single<Scalar>(q_set.vectors[0], q_set.positions[0], p, width, height,
                                          ordering);
}

/// Sum of M independent propagations sharing the same parameters.
template <class Scalar>
FeatureMapT<Scalar> multipath_propagate(const LatentSetT<Scalar>& q_set,
                                        const FinolaParamsT<Scalar>& p, int width, int height,
                                        Ordering ordering = Ordering::averaged) {
  if (q_set.paths() < 1) throw ShapeMismatchError("multipath_propagate: empty latent set");
  if (q_set.positions.size() != q_set.vectors.size())
    throw ShapeMismatchError("multipath_propagate: " + std::to_string(q_set.vectors.size()) +
                             " vectors vs " + std::to_string(q_set.positions.size()) + " positions");
  FeatureMapT<Scalar> sum =
      detail::propagate_single<Scalar>(q_set.vectors[0], q_set.positions[0], p, width, height, ordering);
  for (int i = 1; i < q_set.paths(); ++i)
    sum.data += detail::propagate_single<Scalar>(q_set.vectors[i], q_set.positions[i], p, width,
                                                 height, ordering)
                    .data;
  return sum;
}

/// Averaged-ordering map computed with `workers` threads. The seed row and
/// seed column are built sequentially, then columns (h_first half) and rows
/// (v_first half) are distributed in contiguous ranges; per-element operation
/// order matches the sequential path exactly, so the result is bitwise equal
/// to propagate(..., averaged) for any worker count.
FeatureMap propagate_parallel(const LatentSet& q_set, const FinolaParams& p, int width, int height,
                              int workers);

/// Runs fn(begin, end) over a partition of [0, count) on the shared pool.
/// Exposed so benchmarks can pre-warm worker threads.
void pool_run_partitioned(int count, int workers, const std::function<void(int, int)>& fn);

}  // namespace finola
