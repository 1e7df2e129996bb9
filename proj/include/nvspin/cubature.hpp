#pragma once

// Globally adaptive cubature over 3-D boxes using the Genz-Malik degree-7
// rule with its embedded degree-5 rule for the error estimate. Cells are
// bisected along the axis with the largest fourth difference. Results are
// summed in cell-creation order with compensated summation, so the output
// depends only on the inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace nvspin {

struct Box {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

struct CubatureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 0.0;
  std::size_t max_evaluations = 5'000'000;
  int max_depth = 60;
};

template <std::size_t N>
struct CubatureResult {
  std::array<double, N> value{};
  std::array<double, N> error{};
  std::size_t evaluations = 0;
  std::size_t cells = 0;
  bool converged = false;

  double error_norm() const {
    double s = 0.0;
    for (double e : error) s += e * e;
    return std::sqrt(s);
  }
  double value_norm() const {
    double s = 0.0;
    for (double v : value) s += v * v;
    return std::sqrt(s);
  }
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

struct GenzMalik3 {
  static constexpr double lambda2 = 0.35856858280031809199;  // sqrt(9/70)
  static constexpr double lambda4 = 0.94868329805051379960;  // sqrt(9/10)
  static constexpr double lambda5 = 0.68824720161168529772;  // sqrt(9/19)
  static constexpr double w1 = -10936.0 / 19683.0;
  static constexpr double w2 = 980.0 / 6561.0;
  static constexpr double w3 = 620.0 / 19683.0;
  static constexpr double w4 = 200.0 / 19683.0;
  static constexpr double w5 = 6859.0 / 19683.0 / 8.0;
  static constexpr double e1 = -1671.0 / 729.0;
  static constexpr double e2 = 245.0 / 486.0;
  static constexpr double e3 = -35.0 / 1458.0;
  static constexpr double e4 = 25.0 / 729.0;
  static constexpr double ratio = (9.0 / 70.0) / (9.0 / 10.0);
  static constexpr std::size_t points = 33;
};

template <std::size_t N>
struct Cell {
  Box box;
  std::array<double, N> value{};
  std::array<double, N> error{};
  double error_norm = 0.0;
  int split_axis = 0;
  int depth = 0;
  std::size_t id = 0;
};

template <std::size_t N>
inline double norm(const std::array<double, N>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

template <std::size_t N, class F>
void evaluate_cell(F& f, Cell<N>& cell) {
  using R = GenzMalik3;
  std::array<double, 3> c{}, h{};
  double volume = 1.0;
  for (int i = 0; i < 3; ++i) {
    c[i] = 0.5 * (cell.box.lo[i] + cell.box.hi[i]);
    h[i] = 0.5 * (cell.box.hi[i] - cell.box.lo[i]);
    volume *= 2.0 * h[i];
  }

  std::array<double, N> s1{}, s2{}, s3{}, s4{}, s5{};
  std::array<double, 3> diff{};
  auto add = [](std::array<double, N>& acc, const std::array<double, N>& v) {
    for (std::size_t j = 0; j < N; ++j) acc[j] += v[j];
  };

  s1 = f(c);
  for (int i = 0; i < 3; ++i) {
    std::array<double, 3> p = c;
    p[i] = c[i] - R::lambda2 * h[i];
    const auto a = f(p);
    p[i] = c[i] + R::lambda2 * h[i];
    const auto b = f(p);
    p[i] = c[i] - R::lambda4 * h[i];
    const auto a4 = f(p);
    p[i] = c[i] + R::lambda4 * h[i];
    const auto b4 = f(p);
    add(s2, a);
    add(s2, b);
    add(s3, a4);
    add(s3, b4);
    double d = 0.0;
    for (std::size_t j = 0; j < N; ++j)
      d += std::abs((a[j] + b[j] - 2.0 * s1[j]) - R::ratio * (a4[j] + b4[j] - 2.0 * s1[j]));
    diff[i] = d;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      for (int si = -1; si <= 1; si += 2) {
        for (int sj = -1; sj <= 1; sj += 2) {
          std::array<double, 3> p = c;
          p[i] = c[i] + si * R::lambda4 * h[i];
          p[j] = c[j] + sj * R::lambda4 * h[j];
          add(s4, f(p));
        }
      }
    }
  }
  for (int corner = 0; corner < 8; ++corner) {
    std::array<double, 3> p{};
    for (int i = 0; i < 3; ++i)
      p[i] = c[i] + (((corner >> i) & 1) ? 1.0 : -1.0) * R::lambda5 * h[i];
    add(s5, f(p));
  }

  for (std::size_t j = 0; j < N; ++j) {
    const double seventh =
        volume * (R::w1 * s1[j] + R::w2 * s2[j] + R::w3 * s3[j] + R::w4 * s4[j] + R::w5 * s5[j]);
    const double fifth = volume * (R::e1 * s1[j] + R::e2 * s2[j] + R::e3 * s3[j] + R::e4 * s4[j]);
    cell.value[j] = seventh;
    cell.error[j] = std::abs(seventh - fifth);
  }
  cell.error_norm = norm(cell.error);

  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    const double widest = cell.box.hi[axis] - cell.box.lo[axis];
    const double w = cell.box.hi[i] - cell.box.lo[i];
    if (diff[i] > diff[axis] * (1.0 + 1e-12) ||
        (std::abs(diff[i] - diff[axis]) <= 1e-12 * diff[axis] && w > widest))
      axis = i;
  }
  cell.split_axis = axis;
}

}  // namespace detail

/// Integrates f over the union of the given boxes. f maps a point
/// std::array<double,3> to std::array<double,N>. Stops when the estimated
/// error norm is at most max(abs_tol, rel_tol * |value|), or when the budget
/// or the depth limit is exhausted (converged == false in that case).
template <std::size_t N, class F>
CubatureResult<N> integrate_cubature(F&& f, const std::vector<Box>& boxes,
                                     const CubatureOptions& opts) {
  using Cell = detail::Cell<N>;
  CubatureResult<N> out;

  std::vector<Cell> cells;
  cells.reserve(boxes.size() * 4);
  auto by_error = [&cells](std::size_t a, std::size_t b) {
    if (cells[a].error_norm != cells[b].error_norm)
      return cells[a].error_norm < cells[b].error_norm;
    return cells[a].id > cells[b].id;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_error)> queue(by_error);
  std::vector<char> active;

  std::array<double, N> total{};
  std::array<double, N> total_err{};
  auto accumulate = [&](const Cell& c, double sign) {
    for (std::size_t j = 0; j < N; ++j) {
      total[j] += sign * c.value[j];
      total_err[j] += sign * c.error[j];
    }
  };

  for (const Box& b : boxes) {
    Cell c;
    c.box = b;
    c.id = cells.size();
    detail::evaluate_cell(f, c);
    out.evaluations += detail::GenzMalik3::points;
    accumulate(c, 1.0);
    cells.push_back(c);
    active.push_back(1);
    queue.push(c.id);
  }

  auto converged = [&]() {
    const double err = detail::norm(total_err);
    return err <= std::max(opts.abs_tol, opts.rel_tol * detail::norm(total));
  };

  while (!queue.empty() && !converged()) {
    if (out.evaluations + 2 * detail::GenzMalik3::points > opts.max_evaluations) break;
    const std::size_t idx = queue.top();
    queue.pop();
    if (cells[idx].depth >= opts.max_depth) continue;  // frozen: keeps its estimate

    const Cell parent = cells[idx];
    active[idx] = 0;
    accumulate(parent, -1.0);

    const int ax = parent.split_axis;
    const double mid = 0.5 * (parent.box.lo[ax] + parent.box.hi[ax]);
    for (int half = 0; half < 2; ++half) {
      Cell c;
      c.box = parent.box;
      if (half == 0)
        c.box.hi[ax] = mid;
      else
        c.box.lo[ax] = mid;
      c.depth = parent.depth + 1;
      c.id = cells.size();
      detail::evaluate_cell(f, c);
      out.evaluations += detail::GenzMalik3::points;
      accumulate(c, 1.0);
      cells.push_back(c);
      active.push_back(1);
      queue.push(c.id);
    }
  }

  // Recompute the totals in id order so rounding does not depend on history.
  std::array<CompensatedSum, N> val, err;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!active[i]) continue;
    ++out.cells;
    for (std::size_t j = 0; j < N; ++j) {
      val[j].add(cells[i].value[j]);
      err[j].add(cells[i].error[j]);
    }
  }
  for (std::size_t j = 0; j < N; ++j) {
    out.value[j] = val[j].value();
    out.error[j] = err[j].value();
  }
  out.converged = out.error_norm() <= std::max(opts.abs_tol, opts.rel_tol * out.value_norm());
  return out;
}

}  // namespace nvspin
