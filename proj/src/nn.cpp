#include "trajflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace trajflow::nn {

Param* ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->shape = std::move(shape);
  p->value.assign(n, 0.0);
  p->grad.assign(n, 0.0);
  params_.push_back(std::move(p));
  return params_.back().get();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

Param* ParamStore::add_dense(const std::string& name, std::size_t out,
                             std::size_t in, std::mt19937_64& rng) {
  Param* p = add(name, {out, in});
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p->value) v = dist(rng);
  return p;
}

Param* ParamStore::add_bias(const std::string& name, std::size_t n) {
  return add(name, {n});
}

Param* ParamStore::add_embedding(const std::string& name, std::size_t rows,
                                 std::size_t dim, std::mt19937_64& rng) {
  Param* p = add(name, {rows, dim});
  std::normal_distribution<double> dist(0.0, 0.02);
  for (auto& v : p->value) v = dist(rng);
  return p;
}

Var Tape::emit(std::vector<double> value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), {}, std::move(back)});
  nodes_.back().grad.assign(nodes_.back().value.size(), 0.0);
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(std::vector<double> v) { return emit(std::move(v), {}); }

const std::vector<double>& Tape::val(Var v) const {
  return nodes_.at(static_cast<std::size_t>(v.id)).value;
}

std::vector<double>& Tape::grad(Var v) {
  return nodes_.at(static_cast<std::size_t>(v.id)).grad;
}

Var Tape::matvec(Var x, Param& w) {
  const auto& xv = val(x);
  if (w.cols() != xv.size())
    throw std::invalid_argument("matvec: shape mismatch for " + w.name);
  const std::size_t out = w.rows(), in = w.cols();
  std::vector<double> y(out, 0.0);
  for (std::size_t r = 0; r < out; ++r) {
    const double* row = &w.value[r * in];
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * xv[c];
    y[r] = acc;
  }
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, x, &w, result] {
    const auto& gy = grad(result);
    const auto& xv = val(x);
    auto& gx = grad(x);
    const std::size_t out = w.rows(), in = w.cols();
    double* wg = param_grad(w);
    for (std::size_t r = 0; r < out; ++r) {
      const double g = gy[r];
      if (g == 0.0) continue;
      const double* row = &w.value[r * in];
      double* grow = &wg[r * in];
      for (std::size_t c = 0; c < in; ++c) {
        gx[c] += g * row[c];
        grow[c] += g * xv[c];
      }
    }
  };
  return result;
}

Var Tape::dense(Var x, Param& w, Param& b) {
  if (b.size() != w.rows())
    throw std::invalid_argument("dense: bias shape mismatch for " + b.name);
  Var y = matvec(x, w);
  auto& yv = nodes_.back().value;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += b.value[i];
  auto prev_back = std::move(nodes_.back().back);
  Var result = y;
  nodes_.back().back = [this, result, &b, prev = std::move(prev_back)] {
    const auto& gy = grad(result);
    double* bg = param_grad(b);
    for (std::size_t i = 0; i < gy.size(); ++i) bg[i] += gy[i];
    prev();
  };
  return result;
}

Var Tape::silu(Var x) {
  const auto& xv = val(x);
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-xv[i]));
    y[i] = xv[i] * s;
  }
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, x, result] {
    const auto& gy = grad(result);
    const auto& xv = val(x);
    auto& gx = grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-xv[i]));
      gx[i] += gy[i] * (s + xv[i] * s * (1.0 - s));
    }
  };
  return result;
}

Var Tape::layer_norm(Var x, Param& gamma, Param& beta) {
  const auto& xv = val(x);
  const std::size_t n = xv.size();
  if (gamma.size() != n || beta.size() != n)
    throw std::invalid_argument("layer_norm: affine shape mismatch");
  constexpr double eps = 1e-5;
  double mean = 0.0;
  for (double v : xv) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : xv) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = gamma.value[i] * (xv[i] - mean) * inv_std + beta.value[i];
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, x, result, &gamma, &beta, mean, inv_std, n] {
    const auto& gy = grad(result);
    const auto& xv = val(x);
    auto& gx = grad(x);
    std::vector<double> xhat(n), gxhat(n);
    double* gg = param_grad(gamma);
    double* bg = param_grad(beta);
    double sum_gxhat = 0.0, sum_gxhat_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xhat[i] = (xv[i] - mean) * inv_std;
      gxhat[i] = gy[i] * gamma.value[i];
      gg[i] += gy[i] * xhat[i];
      bg[i] += gy[i];
      sum_gxhat += gxhat[i];
      sum_gxhat_xhat += gxhat[i] * xhat[i];
    }
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      gx[i] += inv_std *
               (gxhat[i] - sum_gxhat / dn - xhat[i] * sum_gxhat_xhat / dn);
  };
  return result;
}

Var Tape::embedding(Param& table, std::size_t row) {
  if (row >= table.rows())
    throw std::invalid_argument("embedding: index " + std::to_string(row) +
                                " out of range for " + table.name);
  const std::size_t dim = table.cols();
  std::vector<double> y(table.value.begin() + static_cast<std::ptrdiff_t>(row * dim),
                        table.value.begin() + static_cast<std::ptrdiff_t>((row + 1) * dim));
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, result, &table, row, dim] {
    const auto& gy = grad(result);
    double* tg = param_grad(table);
    for (std::size_t i = 0; i < dim; ++i) tg[row * dim + i] += gy[i];
  };
  return result;
}

Var Tape::add(Var a, Var b) {
  const auto& av = val(a);
  const auto& bv = val(b);
  if (av.size() != bv.size()) throw std::invalid_argument("add: shape mismatch");
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, a, b, result] {
    const auto& gy = grad(result);
    auto& ga = grad(a);
    auto& gb = grad(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  };
  return result;
}

Var Tape::sub(Var a, Var b) {
  const auto& av = val(a);
  const auto& bv = val(b);
  if (av.size() != bv.size()) throw std::invalid_argument("sub: shape mismatch");
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, a, b, result] {
    const auto& gy = grad(result);
    auto& ga = grad(a);
    auto& gb = grad(b);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  };
  return result;
}

Var Tape::scale(Var a, double s) {
  const auto& av = val(a);
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * av[i];
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, a, s, result] {
    const auto& gy = grad(result);
    auto& ga = grad(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += s * gy[i];
  };
  return result;
}

Var Tape::concat(const std::vector<Var>& parts) {
  std::vector<double> y;
  for (Var p : parts) {
    const auto& v = val(p);
    y.insert(y.end(), v.begin(), v.end());
  }
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, parts, result] {
    const auto& gy = grad(result);
    std::size_t off = 0;
    for (Var p : parts) {
      auto& gp = grad(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
      off += gp.size();
    }
  };
  return result;
}

Var Tape::add_const(Var a, const std::vector<double>& c) {
  const auto& av = val(a);
  if (av.size() != c.size())
    throw std::invalid_argument("add_const: shape mismatch");
  std::vector<double> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + c[i];
  Var result = emit(std::move(y), {});
  nodes_.back().back = [this, a, result] {
    const auto& gy = grad(result);
    auto& ga = grad(a);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  };
  return result;
}

Var Tape::mse_masked(Var pred, const std::vector<double>& target,
                     const std::vector<double>& mask) {
  const auto& pv = val(pred);
  if (pv.size() != target.size() || pv.size() != mask.size())
    throw std::invalid_argument("mse_masked: shape mismatch");
  double count = 0.0;
  for (double m : mask)
    if (m != 0.0) count += 1.0;
  if (count == 0.0) count = 1.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - target[i];
    loss += mask[i] * d * d;
  }
  loss /= count;
  Var result = emit({loss}, {});
  nodes_.back().back = [this, pred, target, mask, count, result] {
    const double g = grad(result)[0];
    const auto& pv = val(pred);
    auto& gp = grad(pred);
    for (std::size_t i = 0; i < pv.size(); ++i)
      gp[i] += g * 2.0 * mask[i] * (pv[i] - target[i]) / count;
  };
  return result;
}

Var Tape::second_difference_penalty(Var x) {
  const auto& xv = val(x);
  const std::size_t k = xv.size() / 2;
  if (k < 3) return input({0.0});
  double loss = 0.0;
  for (std::size_t i = 1; i + 1 < k; ++i) {
    for (int a = 0; a < 2; ++a) {
      const double d = xv[2 * (i - 1) + a] - 2.0 * xv[2 * i + a] +
                       xv[2 * (i + 1) + a];
      loss += d * d;
    }
  }
  const double denom = static_cast<double>(2 * (k - 2));
  loss /= denom;
  Var result = emit({loss}, {});
  nodes_.back().back = [this, x, k, denom, result] {
    const double g = grad(result)[0];
    const auto& xv = val(x);
    auto& gx = grad(x);
    for (std::size_t i = 1; i + 1 < k; ++i) {
      for (int a = 0; a < 2; ++a) {
        const double d = xv[2 * (i - 1) + a] - 2.0 * xv[2 * i + a] +
                         xv[2 * (i + 1) + a];
        const double c = g * 2.0 * d / denom;
        gx[2 * (i - 1) + a] += c;
        gx[2 * i + a] -= 2.0 * c;
        gx[2 * (i + 1) + a] += c;
      }
    }
  };
  return result;
}

Var Tape::bound_penalty(Var x) {
  const auto& xv = val(x);
  double loss = 0.0;
  for (double v : xv) loss += std::max(0.0, std::abs(v) - 1.0);
  loss /= static_cast<double>(xv.size());
  Var result = emit({loss}, {});
  nodes_.back().back = [this, x, result] {
    const double g = grad(result)[0];
    const auto& xv = val(x);
    auto& gx = grad(x);
    const double n = static_cast<double>(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (std::abs(xv[i]) > 1.0) gx[i] += g * (xv[i] > 0.0 ? 1.0 : -1.0) / n;
  };
  return result;
}

void Tape::backward(Var loss) {
  auto& g = grad(loss);
  if (g.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  g[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;)
    if (nodes_[i].back) nodes_[i].back();
}

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  for (const auto& p : store_.all()) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  const auto& params = store_.all();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                 p.name + "'");
      m_[pi][i] = cfg_.beta1 * m_[pi][i] + (1.0 - cfg_.beta1) * g;
      v_[pi][i] = cfg_.beta2 * v_[pi][i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      if (!std::isfinite(p.value[i]))
        throw std::runtime_error("adam_step: non-finite value in parameter '" +
                                 p.name + "'");
    }
  }
  store_.zero_grad();
}

double PlateauScheduler::step(double monitored_loss, double current_lr) {
  if (monitored_loss < best_ - min_delta_) {
    best_ = monitored_loss;
    bad_count_ = 0;
    return current_lr;
  }
  if (++bad_count_ >= patience_) {
    bad_count_ = 0;
    return std::max(lr_min_, current_lr * factor_);
  }
  return current_lr;
}

double gradient_check(ParamStore& store,
                      const std::function<double()>& loss_fn,
                      const std::function<void()>& backward_fn, double h,
                      std::size_t max_entries) {
  store.zero_grad();
  backward_fn();
  double max_rel = 0.0;
  for (const auto& p : store.all()) {
    const std::size_t n = p->size();
    const std::size_t stride = std::max<std::size_t>(1, n / max_entries);
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double lp = loss_fn();
      p->value[i] = orig - h;
      const double lm = loss_fn();
      p->value[i] = orig;
      const double g_fd = (lp - lm) / (2.0 * h);
      const double g_an = p->grad[i];
      const double rel = std::abs(g_fd - g_an) /
                         std::max(1e-8, std::abs(g_fd) + std::abs(g_an));
      max_rel = std::max(max_rel, rel);
    }
  }
  store.zero_grad();
  return max_rel;
}

}  // namespace trajflow::nn
