#pragma once

#include <complex>
#include <set>
#include <string>
#include <vector>

#include "trajflow/geo.hpp"

namespace trajflow::harmonize {

using geo::Path;
using geo::Vec2;

enum class Method {
  DIRECT_K,
  DCT,
  RDP_K,
  ANCHOR,
  SPLINE_LSQ,
  DCT_DEVIATION,
  FFT_COMPLEX,
};

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);
std::vector<Method> all_methods();

struct CompressedPath {
  Method method = Method::RDP_K;
  std::size_t budget = 0;           // K
  std::size_t original_length = 0;  // L of the source path
  std::size_t transform_length = 0; // sample count the DCT/FFT was taken over

  // Keypoints (DIRECT_K, RDP_K) or spline control points (ANCHOR, SPLINE_LSQ);
  // for DCT_DEVIATION, exactly the two endpoints.
  std::vector<Vec2> points;
  std::vector<double> coeff_x, coeff_y;   // DCT per-axis coefficients
  std::vector<double> deviation_coeffs;   // DCT_DEVIATION: 2K-4 coefficients
  std::vector<std::complex<double>> spectrum;  // FFT_COMPLEX: first K bins
};

// Distance from p to the infinite line through a and b (point distance if a==b).
double perpendicular_distance(const Vec2& p, const Vec2& a, const Vec2& b);

// Recursive Ramer-Douglas-Peucker; output is a subsequence of the input
// containing both endpoints. Ties in the max-distance search keep the lowest
// index.
Path rdp(const Path& path, double epsilon);

// Binary search on epsilon until the simplified polyline is closest to K
// vertices, then interpolate down or subdivide longest segments to exactly K.
Path rdp_to_k(const Path& path, std::size_t k);

CompressedPath parameterize(const Path& path, Method method, std::size_t k);
Path reconstruct(const CompressedPath& compressed, std::size_t length);

struct BenchmarkRow {
  Method method;
  std::size_t budget;
  double mean_dtw_km;
  double mean_frechet_km;
  std::size_t n_ok;
  std::size_t n_skipped;
};

// Compresses every trajectory in normalized space, reconstructs to the working
// length, denormalizes, and reports mean DTW / Frechet (km) per (method, K).
std::vector<BenchmarkRow> compression_benchmark(
    const std::vector<geo::Trajectory>& dataset,
    const std::vector<Method>& methods, const std::vector<std::size_t>& budgets,
    std::size_t working_length = 120);

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

// Orthonormal DCT-II and its inverse (DCT-III); exposed for reuse and testing.
std::vector<double> dct2(const std::vector<double>& x);
std::vector<double> idct2(const std::vector<double>& coeffs, std::size_t n);

}  // namespace trajflow::harmonize
