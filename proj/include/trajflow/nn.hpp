#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace trajflow::nn {

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
};

// Owns all learnable parameters of a model; pointers remain stable.
class ParamStore {
 public:
  Param* add(std::string name, std::vector<std::size_t> shape);
  Param* find(const std::string& name);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  std::size_t total_size() const;
  void zero_grad();

  // Glorot-uniform for matrices, zeros for vectors, unless overridden later.
  Param* add_dense(const std::string& name, std::size_t out, std::size_t in,
                   std::mt19937_64& rng);
  Param* add_bias(const std::string& name, std::size_t n);
  Param* add_embedding(const std::string& name, std::size_t rows,
                       std::size_t dim, std::mt19937_64& rng);  // N(0, 0.02)

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

struct Var {
  int id = -1;
};

// Reverse-mode tape scoped to one forward/backward pass. Gradients of
// parameters accumulate into Param::grad by default; a grad hook can redirect
// them into per-worker buffers so batch members can run on separate threads.
class Tape {
 public:
  using GradHook = std::function<double*(Param&)>;
  void set_param_grad_hook(GradHook hook) { grad_hook_ = std::move(hook); }

  Var input(std::vector<double> v);
  const std::vector<double>& val(Var v) const;
  std::vector<double>& grad(Var v);

  Var dense(Var x, Param& w, Param& b);  // y = Wx + b, W is {out, in}
  Var matvec(Var x, Param& w);           // y = Wx (no bias)
  Var silu(Var x);
  Var layer_norm(Var x, Param& gamma, Param& beta);  // eps = 1e-5
  Var embedding(Param& table, std::size_t row);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var concat(const std::vector<Var>& parts);
  Var add_const(Var a, const std::vector<double>& c);

  // mean over entries with mask != 0 of mask * (pred - target)^2; scalar.
  Var mse_masked(Var pred, const std::vector<double>& target,
                 const std::vector<double>& mask);
  // Mean squared second difference of a flattened (K,2) keypoint sequence.
  Var second_difference_penalty(Var x);
  // Mean hinge penalty on |coordinate| - 1.
  Var bound_penalty(Var x);

  void backward(Var loss);  // seeds d(loss)=1 and runs the tape in reverse

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void()> back;  // may be empty for leaves
  };
  std::vector<Node> nodes_;
  GradHook grad_hook_;
  Var emit(std::vector<double> value, std::function<void()> back);
  double* param_grad(Param& p) {
    return grad_hook_ ? grad_hook_(p) : p.grad.data();
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg);
  // Bias-corrected update; zeroes gradients afterward. Throws on a non-finite
  // gradient, naming the parameter.
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return step_count_; }
  void set_step_count(long n) { step_count_ = n; }
  std::vector<std::vector<double>>& moments_m() { return m_; }
  std::vector<std::vector<double>>& moments_v() { return v_; }

 private:
  ParamStore& store_;
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ReduceLROnPlateau: halve when no improvement > min_delta for `patience`
// consecutive evaluations; floor at lr_min.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, int patience = 200,
                   double min_delta = 1e-6, double lr_min = 1e-7)
      : factor_(factor), patience_(patience), min_delta_(min_delta),
        lr_min_(lr_min) {}
  double step(double monitored_loss, double current_lr);

 private:
  double factor_;
  int patience_;
  double min_delta_;
  double lr_min_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_count_ = 0;
};

// Central finite differences against the analytic gradient.
// loss_fn must build a fresh tape and return the scalar loss without touching
// gradients. Checks at most max_entries coordinates per parameter.
double gradient_check(ParamStore& store,
                      const std::function<double()>& loss_fn,
                      const std::function<void()>& backward_fn,
                      double h = 1e-5, std::size_t max_entries = 16);

}  // namespace trajflow::nn
