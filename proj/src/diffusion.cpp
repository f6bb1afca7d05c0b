#include "trajflow/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "trajflow/condition.hpp"

namespace trajflow::diffusion {

NoiseSchedule::NoiseSchedule(int total_steps, double beta_lo, double beta_hi)
    : T(total_steps) {
  if (T < 1) throw std::invalid_argument("noise schedule: T must be >= 1");
  beta.resize(static_cast<std::size_t>(T));
  alpha_bar.resize(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0
                               : static_cast<double>(i) /
                                     static_cast<double>(T - 1);
    beta[static_cast<std::size_t>(i)] = beta_lo + (beta_hi - beta_lo) * frac;
    prod *= 1.0 - beta[static_cast<std::size_t>(i)];
    alpha_bar[static_cast<std::size_t>(i)] = prod;
  }
}

double NoiseSchedule::abar(int step) const {
  if (step < 0 || step > T)
    throw std::invalid_argument("noise schedule: step outside [0, T]");
  return step == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(step - 1)];
}

NoisedSample forward_noise(const std::vector<double>& x_data, int step,
                           std::mt19937_64& rng,
                           const NoiseSchedule& schedule) {
  if (step < 1 || step > schedule.T)
    throw std::invalid_argument("forward_noise: step outside [1, T]");
  const double ab = schedule.abar(step);
  const double s_sig = std::sqrt(ab);
  const double s_eps = std::sqrt(1.0 - ab);
  std::normal_distribution<double> normal(0.0, 1.0);
  NoisedSample out;
  out.eps.resize(x_data.size());
  out.x_noisy.resize(x_data.size());
  for (std::size_t i = 0; i < x_data.size(); ++i) {
    out.eps[i] = normal(rng);
    out.x_noisy[i] = s_sig * x_data[i] + s_eps * out.eps[i];
  }
  return out;
}

double ddpm_loss(flow::VectorFieldModel& model,
                 std::span<const flow::PreparedSample> batch,
                 std::mt19937_64& rng, const NoiseSchedule& schedule,
                 bool with_grad) {
  if (batch.empty()) throw std::invalid_argument("ddpm_loss: empty batch");
  const auto& cfg = model.config();
  std::uniform_int_distribution<int> step_dist(1, schedule.T);

  std::vector<flow::detail::SampleLoss> prepared;
  prepared.reserve(batch.size());
  for (const auto& s : batch) {
    flow::detail::SampleLoss sl;
    const int step = step_dist(rng);
    auto noised = forward_noise(s.x1, step, rng, schedule);
    sl.x_in = std::move(noised.x_noisy);
    sl.target = std::move(noised.eps);
    // The backbone's scalar time input is the normalized diffusion step.
    sl.t = static_cast<double>(step) / static_cast<double>(schedule.T);
    sl.cond = condition::condition_dropout(s.cond, cfg.cond_dropout, rng);
    sl.mask = s.mask;
    sl.od_target = s.od_target;
    sl.flow_regularizers = false;
    prepared.push_back(std::move(sl));
  }
  return flow::detail::batch_loss(model, prepared, with_grad);
}

flow::SampleOut ddim_sample(flow::VectorFieldModel& model,
                            const condition::ConditionSpec& spec,
                            std::size_t steps, const NoiseSchedule& schedule,
                            std::mt19937_64& rng) {
  if (steps < 1 || steps > static_cast<std::size_t>(schedule.T))
    throw std::invalid_argument("ddim_sample: steps outside [1, T]");
  const std::size_t dim = 2 * model.config().K;

  // Uniform sub-schedule T = tau_n > tau_{n-1} > ... > tau_0 = 0.
  std::vector<int> taus(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i)
    taus[i] = static_cast<int>(std::llround(
        static_cast<double>(schedule.T) * static_cast<double>(i) /
        static_cast<double>(steps)));

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(dim);
  for (auto& v : x) v = normal(rng);

  for (std::size_t i = steps; i >= 1; --i) {
    const int t_cur = taus[i];
    const int t_prev = taus[i - 1];
    const double ab_cur = schedule.abar(t_cur);
    const double ab_prev = schedule.abar(t_prev);
    const std::vector<double> eps = model.vector_field(
        x, static_cast<double>(t_cur) / static_cast<double>(schedule.T), spec);
    for (std::size_t j = 0; j < dim; ++j) {
      const double x0 =
          (x[j] - std::sqrt(1.0 - ab_cur) * eps[j]) / std::sqrt(ab_cur);
      x[j] = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps[j];
    }
  }
  return {std::move(x), model.predict_fine_od(spec)};
}

geo::Trajectory ddpm_generate(flow::VectorFieldModel& model,
                              const condition::ConditionSpec& spec,
                              std::size_t L, std::size_t steps,
                              const NoiseSchedule& schedule,
                              std::mt19937_64& rng) {
  condition::ConditionSpec completed = spec;
  flow::complete_numeric(model, completed, rng);
  flow::SampleOut sample = ddim_sample(model, completed, steps, schedule, rng);
  for (auto& f : sample.fine_od) f = std::clamp(f, 0.0, 1.0);
  return flow::assemble_trajectory(model, completed, sample, L, rng);
}

std::vector<double> snr_profile(const NoiseSchedule& schedule,
                                double signal_scale) {
  std::vector<double> out(static_cast<std::size_t>(schedule.T));
  for (int t = 1; t <= schedule.T; ++t) {
    const double ab = schedule.abar(t);
    out[static_cast<std::size_t>(t - 1)] =
        signal_scale * signal_scale * ab / (1.0 - ab);
  }
  return out;
}

std::string snr_profile_csv(const NoiseSchedule& schedule,
                            const std::vector<double>& signal_scales) {
  std::ostringstream out;
  out.precision(10);
  out << "step";
  for (double s : signal_scales) out << ",snr_scale_" << s;
  out << '\n';
  std::vector<std::vector<double>> profiles;
  for (double s : signal_scales) profiles.push_back(snr_profile(schedule, s));
  for (int t = 1; t <= schedule.T; ++t) {
    out << t;
    for (const auto& p : profiles) out << ',' << p[static_cast<std::size_t>(t - 1)];
    out << '\n';
  }
  return out.str();
}

}  // namespace trajflow::diffusion
