#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajflow/flow.hpp"

namespace trajflow::diffusion {

// Linear beta schedule from 1e-6 to 5e-2 over T steps.
struct NoiseSchedule {
  int T;
  std::vector<double> beta;       // beta[t-1] for t in 1..T
  std::vector<double> alpha_bar;  // cumulative product of (1 - beta)

  explicit NoiseSchedule(int total_steps, double beta_lo = 1e-6,
                         double beta_hi = 5e-2);
  double abar(int step) const;  // step in [0, T], abar(0) = 1
};

// x_noisy = sqrt(abar_t) x + sqrt(1 - abar_t) eps, eps ~ N(0, I).
struct NoisedSample {
  std::vector<double> x_noisy;
  std::vector<double> eps;
};
NoisedSample forward_noise(const std::vector<double>& x_data, int step,
                           std::mt19937_64& rng, const NoiseSchedule& schedule);

// Standard epsilon-prediction objective sharing the flow backbone; same
// masked MSE and auxiliary OD loss as cfm_loss.
double ddpm_loss(flow::VectorFieldModel& model,
                 std::span<const flow::PreparedSample> batch,
                 std::mt19937_64& rng, const NoiseSchedule& schedule,
                 bool with_grad = true);

// Deterministic DDIM (eta = 0) over a uniform sub-schedule of `steps` steps.
flow::SampleOut ddim_sample(flow::VectorFieldModel& model,
                            const condition::ConditionSpec& spec,
                            std::size_t steps, const NoiseSchedule& schedule,
                            std::mt19937_64& rng);

geo::Trajectory ddpm_generate(flow::VectorFieldModel& model,
                              const condition::ConditionSpec& spec,
                              std::size_t L, std::size_t steps,
                              const NoiseSchedule& schedule,
                              std::mt19937_64& rng);

// SNR_t = scale^2 * abar_t / (1 - abar_t), one row per step, as CSV.
std::vector<double> snr_profile(const NoiseSchedule& schedule,
                                double signal_scale);
std::string snr_profile_csv(const NoiseSchedule& schedule,
                            const std::vector<double>& signal_scales);

}  // namespace trajflow::diffusion
