#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajflow/condition.hpp"
#include "trajflow/geo.hpp"
#include "trajflow/nn.hpp"
#include "trajflow/zones.hpp"

namespace trajflow::flow {

// Full training/run configuration; also the key = value config-file schema.
struct TrainConfig {
  std::size_t batch_size = 256;
  double lr = 1e-4;
  std::size_t epochs = 200;
  std::size_t K = 10;   // keypoint budget
  std::size_t L = 120;  // working trajectory length
  std::size_t blocks = 6;
  std::size_t width = 256;
  std::size_t control_dim = 128;
  std::size_t deep_hidden = 512;
  std::size_t time_freqs = 64;
  double lambda_od = 1.0;
  double cond_dropout = 0.1;
  double smooth_w = 0.0;
  double bound_w = 0.0;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 5000;  // steps
  int plateau_patience = 200;
  double plateau_factor = 0.5;
  std::string paradigm = "flow";  // flow | ddpm
  int T = 300;                    // diffusion steps (ddpm)
  std::size_t sample_steps = 10;
};

TrainConfig parse_train_config(const std::string& path);
std::string train_config_to_string(const TrainConfig& cfg);

struct NumericStats {
  std::array<double, 5> mean{};
  std::array<double, 5> stddev{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<double, 5> standardize(const std::array<double, 5>& raw) const;
};

// Per-mode empirical raw-feature statistics; the default source of numeric
// conditions at generation time when the caller supplies none.
struct ModeStats {
  std::array<std::array<double, 5>, 5> mean{};
  std::array<std::array<double, 5>, 5> stddev{};
  std::array<std::size_t, 5> count{};
};

struct PreparedSample {
  std::vector<double> x1;           // 2K flattened normalized keypoints
  std::vector<double> mask;         // per-coordinate validity, same size
  condition::ConditionSpec cond;
  std::array<double, 4> od_target;  // fine OD fractions within the zone cells
};

// x_t = (1-t) x0 + t x1; the regression target is u = x1 - x0.
std::vector<double> straight_path_point(const std::vector<double>& x0,
                                        const std::vector<double>& x1,
                                        double t);

class VectorFieldModel {
 public:
  VectorFieldModel(const TrainConfig& cfg, const zones::ZoneGrid& grid,
                   std::uint64_t init_seed);

  struct ForwardOut {
    nn::Var v;    // predicted vector field (or noise, under ddpm), 2K
    nn::Var e_c;  // condition encoding
  };
  ForwardOut forward(nn::Tape& tape, const std::vector<double>& x, double t,
                     const std::optional<condition::ConditionSpec>& spec);
  nn::Var od_head(nn::Tape& tape, nn::Var e_c);

  // Inference conveniences (fresh local tape, no gradient bookkeeping).
  std::vector<double> vector_field(const std::vector<double>& x, double t,
                                   const std::optional<condition::ConditionSpec>& spec);
  std::array<double, 4> predict_fine_od(const condition::ConditionSpec& spec);

  nn::ParamStore& params() { return store_; }
  const condition::ConditionEncoder& encoder() const { return encoder_; }
  const TrainConfig& config() const { return cfg_; }
  const zones::ZoneGrid& grid() const { return grid_; }
  std::uint64_t arch_hash() const;

  NumericStats numeric_stats;
  ModeStats mode_stats;

 private:
  TrainConfig cfg_;
  zones::ZoneGrid grid_;
  nn::ParamStore store_;
  condition::ConditionEncoder encoder_;
  nn::Param* in_w_;
  nn::Param* in_b_;
  struct Block {
    nn::Param *w1, *b1, *w2, *b2, *control;
  };
  std::vector<Block> blocks_;
  nn::Param* out_w_;
  nn::Param* out_b_;
  nn::Param* od_w1_;
  nn::Param* od_b1_;
  nn::Param* od_w2_;
  nn::Param* od_b2_;
};

// Conditional flow-matching loss over a batch. Populates averaged gradients
// when with_grad is set and returns the mean per-sample loss.
double cfm_loss(VectorFieldModel& model, std::span<const PreparedSample> batch,
                std::mt19937_64& rng, bool with_grad = true);

struct TrainResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  long steps = 0;
  bool early_stopped = false;
};

// Dataset preprocessing: normalize, harmonize to K keypoints, attach
// conditions and fine-OD targets. Also computes dataset statistics when
// fit_stats is set (training split).
std::vector<PreparedSample> prepare_samples(
    VectorFieldModel& model, const std::vector<geo::Trajectory>& dataset,
    bool fit_stats);

TrainResult train(VectorFieldModel& model,
                  const std::vector<PreparedSample>& train_set,
                  const std::vector<PreparedSample>& val_set,
                  std::mt19937_64& rng, nn::Adam& optimizer);

struct SampleOut {
  std::vector<double> keypoints;  // 2K, normalized space
  std::array<double, 4> fine_od;
};

// Euler integration of the learned ODE from t=0 to 1 with classifier-free
// guidance: v = (1+w) v_cond - w v_uncond at every step.
SampleOut euler_sample(VectorFieldModel& model,
                       const condition::ConditionSpec& spec, std::size_t steps,
                       double guidance_w, std::mt19937_64& rng);

// Fills missing (NaN) numeric conditions from per-mode empirical statistics
// and standardizes them against the dataset statistics.
void complete_numeric(VectorFieldModel& model, condition::ConditionSpec& spec,
                      std::mt19937_64& rng);

geo::Trajectory generate(VectorFieldModel& model,
                         const condition::ConditionSpec& spec, std::size_t L,
                         std::size_t steps, double guidance_w,
                         std::mt19937_64& rng);

// Shared post-processing: reconstruct keypoints to L points, anchor the
// OD-conditioned frame to the predicted fine OD, assign timestamps over the
// conditioned travel time, clamp to the world bbox.
geo::Trajectory assemble_trajectory(VectorFieldModel& model,
                                    const condition::ConditionSpec& spec,
                                    const SampleOut& sample, std::size_t L,
                                    std::mt19937_64& rng);

namespace detail {
// One prepared forward/loss evaluation; shared by the flow and ddpm losses.
struct SampleLoss {
  std::vector<double> x_in;
  double t = 0.0;
  std::optional<condition::ConditionSpec> cond;
  std::vector<double> target;
  std::vector<double> mask;
  std::array<double, 4> od_target{};
  bool flow_regularizers = false;
};
double batch_loss(VectorFieldModel& model,
                  const std::vector<SampleLoss>& samples, bool with_grad);
}  // namespace detail

// Checkpoint: binary document with a JSON header {format_version, arch_hash,
// seed, step, config, stats, zone grid} followed by named parameter arrays
// and Adam moments. The loader rejects architecture-hash mismatches.
void save_checkpoint(const std::string& path, VectorFieldModel& model,
                     nn::Adam* optimizer, std::uint64_t seed);
struct LoadedModel {
  std::unique_ptr<VectorFieldModel> model;
  std::uint64_t seed = 0;
  long step = 0;
  std::vector<std::vector<double>> adam_m, adam_v;  // empty if absent
};
LoadedModel load_checkpoint(const std::string& path);

}  // namespace trajflow::flow
