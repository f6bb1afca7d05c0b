#include "trajflow/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "trajflow/metrics.hpp"
#include "trajflow/util.hpp"

namespace trajflow::harmonize {

Method method_from_string(const std::string& s) {
  if (s == "direct_k") return Method::DIRECT_K;
  if (s == "dct") return Method::DCT;
  if (s == "rdp_k") return Method::RDP_K;
  if (s == "anchor") return Method::ANCHOR;
  if (s == "spline_lsq") return Method::SPLINE_LSQ;
  if (s == "dct_deviation") return Method::DCT_DEVIATION;
  if (s == "fft_complex") return Method::FFT_COMPLEX;
  throw std::invalid_argument(
      "unknown method '" + s +
      "'; valid: direct_k, dct, rdp_k, anchor, spline_lsq, dct_deviation, "
      "fft_complex");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::DIRECT_K: return "direct_k";
    case Method::DCT: return "dct";
    case Method::RDP_K: return "rdp_k";
    case Method::ANCHOR: return "anchor";
    case Method::SPLINE_LSQ: return "spline_lsq";
    case Method::DCT_DEVIATION: return "dct_deviation";
    case Method::FFT_COMPLEX: return "fft_complex";
  }
  throw std::invalid_argument("invalid method value");
}

std::vector<Method> all_methods() {
  return {Method::DIRECT_K,      Method::DCT,        Method::RDP_K,
          Method::ANCHOR,        Method::SPLINE_LSQ, Method::DCT_DEVIATION,
          Method::FFT_COMPLEX};
}

double perpendicular_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return std::hypot(p[0] - a[0], p[1] - a[1]);
  return std::abs(dy * (p[0] - a[0]) - dx * (p[1] - a[1])) / len;
}

namespace {

void rdp_rec(const Path& path, std::size_t first, std::size_t last, double eps,
             std::vector<std::size_t>& keep) {
  double d_max = 0.0;
  std::size_t index = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = perpendicular_distance(path[i], path[first], path[last]);
    if (d > d_max) {
      d_max = d;
      index = i;
    }
  }
  if (d_max > eps) {
    rdp_rec(path, first, index, eps, keep);
    keep.pop_back();  // index is re-emitted by the right half
    rdp_rec(path, index, last, eps, keep);
  } else {
    keep.push_back(first);
    keep.push_back(last);
  }
}

Path subdivide_longest_to(Path path, std::size_t k) {
  while (path.size() < k) {
    double longest = -1.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const double len =
          std::hypot(path[i + 1][0] - path[i][0], path[i + 1][1] - path[i][1]);
      if (len > longest) {
        longest = len;
        at = i;
      }
    }
    const Vec2 mid{0.5 * (path[at][0] + path[at + 1][0]),
                   0.5 * (path[at][1] + path[at + 1][1])};
    path.insert(path.begin() + static_cast<std::ptrdiff_t>(at) + 1, mid);
  }
  return path;
}

double bbox_diagonal(const Path& path) {
  Vec2 lo = path.front(), hi = path.front();
  for (const auto& p : path) {
    lo[0] = std::min(lo[0], p[0]);
    lo[1] = std::min(lo[1], p[1]);
    hi[0] = std::max(hi[0], p[0]);
    hi[1] = std::max(hi[1], p[1]);
  }
  return std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
}

}  // namespace

Path rdp(const Path& path, double epsilon) {
  if (path.size() < 2) throw std::invalid_argument("rdp: path shorter than 2");
  if (epsilon < 0.0) throw std::invalid_argument("rdp: negative epsilon");
  std::vector<std::size_t> keep;
  rdp_rec(path, 0, path.size() - 1, epsilon, keep);
  Path out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(path[i]);
  return out;
}

Path rdp_to_k(const Path& path, std::size_t k) {
  if (path.size() < 2) throw std::invalid_argument("rdp_to_k: path shorter than 2");
  if (k < 2) throw std::invalid_argument("rdp_to_k: K must be >= 2");
  if (k == path.size()) return path;
  if (k > path.size()) return subdivide_longest_to(path, k);

  double lo = 0.0, hi = bbox_diagonal(path);
  Path best = rdp(path, lo);
  auto consider = [&](Path candidate) {
    const auto dist = [&](const Path& p) {
      return p.size() > k ? p.size() - k : k - p.size();
    };
    if (dist(candidate) < dist(best) ||
        (dist(candidate) == dist(best) && candidate.size() > best.size()))
      best = std::move(candidate);
  };
  if (best.size() != k) consider(rdp(path, hi));
  for (int iter = 0; iter < 64 && best.size() != k && hi - lo > 1e-5; ++iter) {
    const double mid = 0.5 * (lo + hi);
    Path candidate = rdp(path, mid);
    const std::size_t count = candidate.size();
    consider(std::move(candidate));
    if (count > k)
      lo = mid;
    else
      hi = mid;
  }
  if (best.size() == k) return best;
  if (best.size() > k) return geo::resample_uniform(best, k);
  return subdivide_longest_to(best, k);
}

std::vector<double> dct2(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t kk = 0; kk < n; ++kk) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                             static_cast<double>(kk) / static_cast<double>(n));
    out[kk] = acc * (kk == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                             : std::sqrt(2.0 / static_cast<double>(n)));
  }
  return out;
}

std::vector<double> idct2(const std::vector<double>& coeffs, std::size_t n) {
  std::vector<double> out(n, 0.0);
  const std::size_t m = std::min(coeffs.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t kk = 0; kk < m; ++kk) {
      const double s = kk == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                               : std::sqrt(2.0 / static_cast<double>(n));
      acc += s * coeffs[kk] *
             std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                      static_cast<double>(kk) / static_cast<double>(n));
    }
    out[i] = acc;
  }
  return out;
}

namespace {

// Clamped uniform cubic B-spline basis with k control points, evaluated at u.
std::vector<double> bspline_basis(std::size_t k, double u) {
  constexpr int p = 3;
  const std::size_t m = k + p + 1;
  std::vector<double> knots(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i <= p)
      knots[i] = 0.0;
    else if (i >= k)
      knots[i] = 1.0;
    else
      knots[i] = static_cast<double>(i - p) / static_cast<double>(k - p);
  }
  u = std::clamp(u, 0.0, 1.0);
  std::vector<double> basis(k, 0.0);
  if (u >= 1.0) {
    basis[k - 1] = 1.0;
    return basis;
  }
  // Cox-de Boor, degree 0 upward.
  std::vector<double> n0(m - 1, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i)
    n0[i] = (u >= knots[i] && u < knots[i + 1]) ? 1.0 : 0.0;
  for (int d = 1; d <= p; ++d) {
    std::vector<double> nd(m - 1 - static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < nd.size(); ++i) {
      double left = 0.0, right = 0.0;
      const double den1 = knots[i + static_cast<std::size_t>(d)] - knots[i];
      if (den1 > 0.0) left = (u - knots[i]) / den1 * n0[i];
      const double den2 =
          knots[i + static_cast<std::size_t>(d) + 1] - knots[i + 1];
      if (den2 > 0.0)
        right = (knots[i + static_cast<std::size_t>(d) + 1] - u) / den2 * n0[i + 1];
      nd[i] = left + right;
    }
    n0 = std::move(nd);
  }
  for (std::size_t i = 0; i < k; ++i) basis[i] = n0[i];
  return basis;
}

std::vector<double> arc_params(const Path& path) {
  std::vector<double> u(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i)
    u[i] = u[i - 1] +
           std::hypot(path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1]);
  const double total = u.back();
  if (total > 0.0)
    for (auto& v : u) v /= total;
  return u;
}

// Solves the symmetric k x k system via Gaussian elimination with pivoting.
std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                 std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (std::abs(a[col][col]) < 1e-300)
      throw std::runtime_error("spline fit: singular system");
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

std::vector<Vec2> fit_spline(const Path& path, std::size_t k,
                             const std::vector<double>& weights) {
  const auto u = arc_params(path);
  const std::size_t n = path.size();
  std::vector<std::vector<double>> design(n);
  for (std::size_t i = 0; i < n; ++i) design[i] = bspline_basis(k, u[i]);

  std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
  std::vector<double> rhs_x(k, 0.0), rhs_y(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    for (std::size_t r = 0; r < k; ++r) {
      if (design[i][r] == 0.0) continue;
      const double wr = w * design[i][r];
      for (std::size_t c = 0; c < k; ++c) ata[r][c] += wr * design[i][c];
      rhs_x[r] += wr * path[i][0];
      rhs_y[r] += wr * path[i][1];
    }
  }
  for (std::size_t r = 0; r < k; ++r) ata[r][r] += 1e-10;  // singular guard
  const auto cx = solve_linear(ata, rhs_x);
  const auto cy = solve_linear(ata, rhs_y);
  std::vector<Vec2> ctrl(k);
  for (std::size_t i = 0; i < k; ++i) ctrl[i] = {cx[i], cy[i]};
  return ctrl;
}

Path eval_spline(const std::vector<Vec2>& ctrl, std::size_t length) {
  const std::size_t k = ctrl.size();
  Path out(length);
  for (std::size_t j = 0; j < length; ++j) {
    const double u =
        static_cast<double>(j) / static_cast<double>(length - 1);
    const auto basis = bspline_basis(k, u);
    Vec2 p{0.0, 0.0};
    for (std::size_t i = 0; i < k; ++i) {
      p[0] += basis[i] * ctrl[i][0];
      p[1] += basis[i] * ctrl[i][1];
    }
    out[j] = p;
  }
  return out;
}

// Anchors: endpoints plus local maxima of turning angle above 30 degrees.
std::vector<double> anchor_weights(const Path& path, double w_anchor) {
  const std::size_t n = path.size();
  std::vector<double> angle(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = path[i][0] - path[i - 1][0];
    const double ay = path[i][1] - path[i - 1][1];
    const double bx = path[i + 1][0] - path[i][0];
    const double by = path[i + 1][1] - path[i][1];
    const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    if (na == 0.0 || nb == 0.0) continue;
    const double c = std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0);
    angle[i] = std::acos(c);
  }
  constexpr double threshold = 30.0 * std::numbers::pi / 180.0;
  std::vector<double> w(n, 1.0);
  w.front() = w.back() = w_anchor;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (angle[i] > threshold && angle[i] >= angle[i - 1] &&
        angle[i] >= angle[i + 1])
      w[i] = w_anchor;
  return w;
}

std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& z) {
  const std::size_t n = z.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t kk = 0; kk < n; ++kk) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double arg = -2.0 * std::numbers::pi * static_cast<double>(kk) *
                         static_cast<double>(i) / static_cast<double>(n);
      acc += z[i] * std::complex<double>(std::cos(arg), std::sin(arg));
    }
    out[kk] = acc;
  }
  return out;
}

Path idft_truncated(const std::vector<std::complex<double>>& spectrum,
                    std::size_t n) {
  Path out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t kk = 0; kk < std::min(spectrum.size(), n); ++kk) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(kk) *
                         static_cast<double>(i) / static_cast<double>(n);
      acc += spectrum[kk] * std::complex<double>(std::cos(arg), std::sin(arg));
    }
    acc /= static_cast<double>(n);
    out[i] = {acc.real(), acc.imag()};
  }
  return out;
}

struct ChordFrame {
  Vec2 origin, tangent, normal;
  double length;
};

ChordFrame chord_frame(const Vec2& a, const Vec2& b) {
  ChordFrame f;
  f.origin = a;
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  f.length = std::hypot(dx, dy);
  if (f.length > 0.0) {
    f.tangent = {dx / f.length, dy / f.length};
  } else {
    f.tangent = {1.0, 0.0};
  }
  f.normal = {-f.tangent[1], f.tangent[0]};
  return f;
}

}  // namespace

CompressedPath parameterize(const Path& path, Method method, std::size_t k) {
  if (path.size() < std::max<std::size_t>(k, 4))
    throw std::invalid_argument("parameterize: path shorter than max(K, 4)");
  if (k < 2) throw std::invalid_argument("parameterize: K must be >= 2");
  if (!(geo::path_length(path) > 0.0))
    throw std::invalid_argument("parameterize: path has zero arc length");

  CompressedPath cp;
  cp.method = method;
  cp.budget = k;
  cp.original_length = path.size();

  switch (method) {
    case Method::DIRECT_K:
      cp.points = geo::resample_uniform(path, k);
      break;
    case Method::RDP_K:
      cp.points = rdp_to_k(path, k);
      break;
    case Method::DCT: {
      const Path uni = geo::resample_uniform(path, path.size());
      cp.transform_length = uni.size();
      std::vector<double> xs(uni.size()), ys(uni.size());
      for (std::size_t i = 0; i < uni.size(); ++i) {
        xs[i] = uni[i][0];
        ys[i] = uni[i][1];
      }
      auto cx = dct2(xs);
      auto cy = dct2(ys);
      cx.resize(std::min<std::size_t>(k, cx.size()));
      cy.resize(std::min<std::size_t>(k, cy.size()));
      cp.coeff_x = std::move(cx);
      cp.coeff_y = std::move(cy);
      break;
    }
    case Method::ANCHOR: {
      if (k < 4) throw std::invalid_argument("anchor: K must be >= 4 for cubic splines");
      cp.points = fit_spline(path, k, anchor_weights(path, 100.0));
      break;
    }
    case Method::SPLINE_LSQ: {
      if (k < 4) throw std::invalid_argument("spline_lsq: K must be >= 4 for cubic splines");
      cp.points = fit_spline(path, k, std::vector<double>(path.size(), 1.0));
      break;
    }
    case Method::DCT_DEVIATION: {
      if (k < 3) throw std::invalid_argument("dct_deviation: K must be >= 3");
      const Path uni = geo::resample_uniform(path, path.size());
      cp.transform_length = uni.size();
      const auto frame = chord_frame(uni.front(), uni.back());
      std::vector<double> dev(uni.size());
      for (std::size_t i = 0; i < uni.size(); ++i) {
        const double px = uni[i][0] - frame.origin[0];
        const double py = uni[i][1] - frame.origin[1];
        dev[i] = px * frame.normal[0] + py * frame.normal[1];
      }
      auto coeffs = dct2(dev);
      coeffs.resize(std::min<std::size_t>(2 * k - 4, coeffs.size()));
      cp.deviation_coeffs = std::move(coeffs);
      cp.points = {uni.front(), uni.back()};
      break;
    }
    case Method::FFT_COMPLEX: {
      const Path uni = geo::resample_uniform(path, path.size());
      cp.transform_length = uni.size();
      std::vector<std::complex<double>> z(uni.size());
      for (std::size_t i = 0; i < uni.size(); ++i)
        z[i] = {uni[i][0], uni[i][1]};
      auto spec = dft(z);
      spec.resize(std::min<std::size_t>(k, spec.size()));
      cp.spectrum = std::move(spec);
      break;
    }
  }
  return cp;
}

Path reconstruct(const CompressedPath& cp, std::size_t length) {
  if (length < 2) throw std::invalid_argument("reconstruct: L must be >= 2");
  switch (cp.method) {
    case Method::DIRECT_K:
    case Method::RDP_K:
      if (cp.points.size() < 2)
        throw std::invalid_argument("reconstruct: malformed keypoint list");
      return geo::resample_uniform(cp.points, length);
    case Method::ANCHOR:
    case Method::SPLINE_LSQ:
      if (cp.points.size() < 4)
        throw std::invalid_argument("reconstruct: malformed control-point list");
      return eval_spline(cp.points, length);
    case Method::DCT: {
      if (cp.transform_length < 2 || cp.coeff_x.empty() || cp.coeff_y.empty())
        throw std::invalid_argument("reconstruct: malformed DCT coefficients");
      const auto xs = idct2(cp.coeff_x, cp.transform_length);
      const auto ys = idct2(cp.coeff_y, cp.transform_length);
      Path p(cp.transform_length);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = {xs[i], ys[i]};
      return geo::resample_uniform(p, length);
    }
    case Method::DCT_DEVIATION: {
      if (cp.transform_length < 2 || cp.points.size() != 2)
        throw std::invalid_argument("reconstruct: malformed deviation payload");
      const auto frame = chord_frame(cp.points[0], cp.points[1]);
      const auto dev = idct2(cp.deviation_coeffs, cp.transform_length);
      Path p(cp.transform_length);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = frame.length * static_cast<double>(i) /
                         static_cast<double>(cp.transform_length - 1);
        p[i] = {frame.origin[0] + s * frame.tangent[0] + dev[i] * frame.normal[0],
                frame.origin[1] + s * frame.tangent[1] + dev[i] * frame.normal[1]};
      }
      p.front() = cp.points[0];
      p.back() = cp.points[1];
      return geo::resample_uniform(p, length);
    }
    case Method::FFT_COMPLEX: {
      if (cp.transform_length < 2 || cp.spectrum.empty())
        throw std::invalid_argument("reconstruct: malformed spectrum");
      return geo::resample_uniform(idft_truncated(cp.spectrum, cp.transform_length),
                                   length);
    }
  }
  throw std::invalid_argument("reconstruct: invalid method");
}

std::vector<BenchmarkRow> compression_benchmark(
    const std::vector<geo::Trajectory>& dataset,
    const std::vector<Method>& methods, const std::vector<std::size_t>& budgets,
    std::size_t working_length) {
  struct Cell {
    double dtw = 0.0, fr = 0.0;
    bool ok = false;
  };
  const std::size_t n_cfg = methods.size() * budgets.size();
  std::vector<std::vector<Cell>> cells(dataset.size(), std::vector<Cell>(n_cfg));

  util::parallel_for(dataset.size(), [&](std::size_t ti) {
    const auto& traj = dataset[ti];
    auto [norm_path, frame] = geo::normalize_trajectory(traj);
    const Path work = geo::resample_uniform(norm_path, working_length);
    const auto ref_geo = geo::denormalize(work, frame);
    std::size_t cfg = 0;
    for (const Method m : methods) {
      for (const std::size_t k : budgets) {
        auto& cell = cells[ti][cfg++];
        try {
          const auto cp = parameterize(work, m, k);
          const auto rec = reconstruct(cp, working_length);
          const auto rec_geo = geo::denormalize(rec, frame);
          cell.dtw = metrics::dtw_geo(ref_geo, rec_geo);
          cell.fr = metrics::frechet_geo(ref_geo, rec_geo);
          cell.ok = std::isfinite(cell.dtw) && std::isfinite(cell.fr);
        } catch (const std::exception&) {
          cell.ok = false;
        }
      }
    }
  });

  std::vector<BenchmarkRow> rows;
  std::size_t cfg = 0;
  for (const Method m : methods) {
    for (const std::size_t k : budgets) {
      BenchmarkRow row{m, k, 0.0, 0.0, 0, 0};
      for (std::size_t ti = 0; ti < dataset.size(); ++ti) {
        const auto& cell = cells[ti][cfg];
        if (cell.ok) {
          row.mean_dtw_km += cell.dtw;
          row.mean_frechet_km += cell.fr;
          ++row.n_ok;
        } else {
          ++row.n_skipped;
        }
      }
      if (row.n_ok > 0) {
        row.mean_dtw_km /= static_cast<double>(row.n_ok);
        row.mean_frechet_km /= static_cast<double>(row.n_ok);
      }
      rows.push_back(row);
      ++cfg;
    }
  }
  return rows;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << "method,K,mean_dtw_km,mean_frechet_km,n_ok,n_skipped\n";
  out.precision(10);
  for (const auto& r : rows)
    out << method_to_string(r.method) << ',' << r.budget << ',' << r.mean_dtw_km
        << ',' << r.mean_frechet_km << ',' << r.n_ok << ',' << r.n_skipped
        << '\n';
  return out.str();
}

}  // namespace trajflow::harmonize
