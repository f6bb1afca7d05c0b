#include "trajflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "trajflow/diffusion.hpp"
#include "trajflow/harmonize.hpp"
#include "trajflow/util.hpp"

namespace trajflow::flow {

using condition::ConditionSpec;

// ---------------------------------------------------------------- config --

namespace {

const std::vector<std::string> kConfigKeys = {
    "batch_size",   "lr",           "epochs",        "K",
    "L",            "blocks",       "width",         "control_dim",
    "deep_hidden",  "time_freqs",   "lambda_od",     "cond_dropout",
    "smooth_w",     "bound_w",      "seed",          "early_stop_patience",
    "plateau_patience", "plateau_factor", "paradigm", "T",
    "sample_steps"};

void apply_key(TrainConfig& cfg, const std::string& key,
               const std::string& value) {
  const auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  const auto as_double = [&] { return std::stod(value); };
  if (key == "batch_size") cfg.batch_size = as_size();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "epochs") cfg.epochs = as_size();
  else if (key == "K") cfg.K = as_size();
  else if (key == "L") cfg.L = as_size();
  else if (key == "blocks") cfg.blocks = as_size();
  else if (key == "width") cfg.width = as_size();
  else if (key == "control_dim") cfg.control_dim = as_size();
  else if (key == "deep_hidden") cfg.deep_hidden = as_size();
  else if (key == "time_freqs") cfg.time_freqs = as_size();
  else if (key == "lambda_od") cfg.lambda_od = as_double();
  else if (key == "cond_dropout") cfg.cond_dropout = as_double();
  else if (key == "smooth_w") cfg.smooth_w = as_double();
  else if (key == "bound_w") cfg.bound_w = as_double();
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "early_stop_patience") cfg.early_stop_patience = as_size();
  else if (key == "plateau_patience") cfg.plateau_patience = std::stoi(value);
  else if (key == "plateau_factor") cfg.plateau_factor = as_double();
  else if (key == "paradigm") {
    if (value != "flow" && value != "ddpm")
      throw std::invalid_argument("config: paradigm must be flow or ddpm");
    cfg.paradigm = value;
  } else if (key == "T") cfg.T = std::stoi(value);
  else if (key == "sample_steps") cfg.sample_steps = as_size();
  else
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    try {
      apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " +
                                  e.what());
    }
  }
  return cfg;
}

std::string train_config_to_string(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "batch_size = " << cfg.batch_size << '\n'
      << "lr = " << cfg.lr << '\n'
      << "epochs = " << cfg.epochs << '\n'
      << "K = " << cfg.K << '\n'
      << "L = " << cfg.L << '\n'
      << "blocks = " << cfg.blocks << '\n'
      << "width = " << cfg.width << '\n'
      << "control_dim = " << cfg.control_dim << '\n'
      << "deep_hidden = " << cfg.deep_hidden << '\n'
      << "time_freqs = " << cfg.time_freqs << '\n'
      << "lambda_od = " << cfg.lambda_od << '\n'
      << "cond_dropout = " << cfg.cond_dropout << '\n'
      << "smooth_w = " << cfg.smooth_w << '\n'
      << "bound_w = " << cfg.bound_w << '\n'
      << "seed = " << cfg.seed << '\n'
      << "early_stop_patience = " << cfg.early_stop_patience << '\n'
      << "plateau_patience = " << cfg.plateau_patience << '\n'
      << "plateau_factor = " << cfg.plateau_factor << '\n'
      << "paradigm = " << cfg.paradigm << '\n'
      << "T = " << cfg.T << '\n'
      << "sample_steps = " << cfg.sample_steps << '\n';
  return out.str();
}

std::array<double, 5> NumericStats::standardize(
    const std::array<double, 5>& raw) const {
  std::array<double, 5> out;
  for (std::size_t i = 0; i < 5; ++i)
    out[i] = (raw[i] - mean[i]) / std::max(stddev[i], 1e-9);
  return out;
}

// ----------------------------------------------------------------- model --

std::vector<double> straight_path_point(const std::vector<double>& x0,
                                        const std::vector<double>& x1,
                                        double t) {
  if (x0.size() != x1.size())
    throw std::invalid_argument("straight_path_point: shape mismatch");
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("straight_path_point: t outside [0,1]");
  std::vector<double> xt(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i)
    xt[i] = (1.0 - t) * x0[i] + t * x1[i];
  return xt;
}

VectorFieldModel::VectorFieldModel(const TrainConfig& cfg,
                                   const zones::ZoneGrid& grid,
                                   std::uint64_t init_seed)
    : cfg_(cfg), grid_(grid) {
  std::mt19937_64 rng(init_seed);
  condition::Vocab vocab;
  vocab.zones = grid.count();
  encoder_.build(store_, vocab,
                 {cfg.control_dim, cfg.deep_hidden, cfg.time_freqs}, rng);
  const std::size_t dim = 2 * cfg.K;
  in_w_ = store_.add_dense("backbone.in.w", cfg.width, dim, rng);
  in_b_ = store_.add_bias("backbone.in.b", cfg.width);
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    const std::string prefix = "backbone.block" + std::to_string(l);
    Block b;
    b.w1 = store_.add_dense(prefix + ".w1", cfg.width, cfg.width, rng);
    b.b1 = store_.add_bias(prefix + ".b1", cfg.width);
    b.w2 = store_.add_dense(prefix + ".w2", cfg.width, cfg.width, rng);
    b.b2 = store_.add_bias(prefix + ".b2", cfg.width);
    b.control = store_.add_dense(prefix + ".control", cfg.width,
                                 cfg.control_dim, rng);
    blocks_.push_back(b);
  }
  out_w_ = store_.add_dense("backbone.out.w", dim, cfg.width, rng);
  out_b_ = store_.add_bias("backbone.out.b", dim);
  od_w1_ = store_.add_dense("od.w1", cfg.control_dim, cfg.control_dim, rng);
  od_b1_ = store_.add_bias("od.b1", cfg.control_dim);
  od_w2_ = store_.add_dense("od.w2", 4, cfg.control_dim, rng);
  od_b2_ = store_.add_bias("od.b2", 4);
  for (std::size_t i = 0; i < 4; ++i) od_b2_->value[i] = 0.5;
}

std::uint64_t VectorFieldModel::arch_hash() const {
  std::ostringstream s;
  s << "K=" << cfg_.K << ";width=" << cfg_.width << ";blocks=" << cfg_.blocks
    << ";control=" << cfg_.control_dim << ";deep=" << cfg_.deep_hidden
    << ";tf=" << cfg_.time_freqs << ";zones=" << grid_.count()
    << ";paradigm=" << cfg_.paradigm << ";T=" << cfg_.T;
  return util::fnv1a(s.str());
}

VectorFieldModel::ForwardOut VectorFieldModel::forward(
    nn::Tape& tape, const std::vector<double>& x, double t,
    const std::optional<ConditionSpec>& spec) {
  if (x.size() != 2 * cfg_.K)
    throw std::invalid_argument("forward: state dimension mismatch");
  nn::Var e_c = encoder_.encode(tape, spec);
  nn::Var control = tape.add(e_c, encoder_.time_embedding(tape, t));
  nn::Var h = tape.dense(tape.input(x), *in_w_, *in_b_);
  for (const Block& b : blocks_) {
    nn::Var f = tape.dense(tape.silu(tape.dense(h, *b.w1, *b.b1)), *b.w2, *b.b2);
    h = tape.add(tape.add(h, f), tape.matvec(control, *b.control));
  }
  return {tape.dense(h, *out_w_, *out_b_), e_c};
}

nn::Var VectorFieldModel::od_head(nn::Tape& tape, nn::Var e_c) {
  nn::Var h = tape.silu(tape.dense(e_c, *od_w1_, *od_b1_));
  return tape.dense(h, *od_w2_, *od_b2_);
}

std::vector<double> VectorFieldModel::vector_field(
    const std::vector<double>& x, double t,
    const std::optional<ConditionSpec>& spec) {
  nn::Tape tape;
  return tape.val(forward(tape, x, t, spec).v);
}

std::array<double, 4> VectorFieldModel::predict_fine_od(
    const ConditionSpec& spec) {
  nn::Tape tape;
  const auto& v = tape.val(od_head(tape, encoder_.encode(tape, spec)));
  return {v[0], v[1], v[2], v[3]};
}

// ------------------------------------------------------------------ loss --

namespace detail {

double batch_loss(VectorFieldModel& model,
                  const std::vector<SampleLoss>& samples, bool with_grad) {
  const std::size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("batch_loss: empty batch");
  const TrainConfig& cfg = model.config();

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(util::thread_count(), n));
  std::vector<double> per_sample(n, 0.0);
  std::vector<std::unordered_map<nn::Param*, std::vector<double>>> buffers(
      workers);

  auto run_range = [&](unsigned w, std::size_t lo, std::size_t hi) {
    auto& buffer = buffers[w];
    for (std::size_t i = lo; i < hi; ++i) {
      const SampleLoss& s = samples[i];
      nn::Tape tape;
      if (with_grad)
        tape.set_param_grad_hook([&buffer](nn::Param& p) {
          auto it = buffer.find(&p);
          if (it == buffer.end())
            it = buffer.emplace(&p, std::vector<double>(p.size(), 0.0)).first;
          return it->second.data();
        });
      auto out = model.forward(tape, s.x_in, s.t, s.cond);
      nn::Var loss = tape.mse_masked(out.v, s.target, s.mask);
      if (cfg.lambda_od != 0.0) {
        nn::Var od = model.od_head(tape, out.e_c);
        nn::Var od_loss = tape.mse_masked(
            od, {s.od_target.begin(), s.od_target.end()}, {1, 1, 1, 1});
        loss = tape.add(loss, tape.scale(od_loss, cfg.lambda_od));
      }
      if (s.flow_regularizers && (cfg.smooth_w != 0.0 || cfg.bound_w != 0.0)) {
        // Regularize the implied data endpoint x1_hat = x_t + (1-t) v.
        nn::Var x1_hat = tape.add_const(tape.scale(out.v, 1.0 - s.t), s.x_in);
        if (cfg.smooth_w != 0.0)
          loss = tape.add(loss, tape.scale(
                                    tape.second_difference_penalty(x1_hat),
                                    cfg.smooth_w));
        if (cfg.bound_w != 0.0)
          loss = tape.add(
              loss, tape.scale(tape.bound_penalty(x1_hat), cfg.bound_w));
      }
      per_sample[i] = tape.val(loss)[0];
      if (with_grad)
        tape.backward(tape.scale(loss, 1.0 / static_cast<double>(n)));
    }
  };

  if (workers <= 1) {
    run_range(0, 0, n);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w)
      threads.emplace_back(run_range, w, n * w / workers, n * (w + 1) / workers);
    for (auto& t : threads) t.join();
  }

  if (with_grad) {
    // Reduce worker buffers in shard order: deterministic for a fixed count.
    for (auto& buffer : buffers)
      for (const auto& p : model.params().all())
        if (auto it = buffer.find(p.get()); it != buffer.end())
          for (std::size_t i = 0; i < p->size(); ++i)
            p->grad[i] += it->second[i];
  }
  double total = 0.0;
  for (double v : per_sample) total += v;
  const double mean = total / static_cast<double>(n);
  if (!std::isfinite(mean))
    throw std::runtime_error("batch_loss: non-finite loss");
  return mean;
}

}  // namespace detail

double cfm_loss(VectorFieldModel& model, std::span<const PreparedSample> batch,
                std::mt19937_64& rng, bool with_grad) {
  if (batch.empty()) throw std::invalid_argument("cfm_loss: empty batch");
  const TrainConfig& cfg = model.config();
  const std::size_t dim = 2 * cfg.K;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // All stochastic draws happen sequentially here so that batch evaluation is
  // independent of worker scheduling.
  std::vector<detail::SampleLoss> prepared;
  prepared.reserve(batch.size());
  for (const PreparedSample& s : batch) {
    if (s.x1.size() != dim)
      throw std::invalid_argument("cfm_loss: sample dimension mismatch");
    detail::SampleLoss sl;
    sl.t = uniform(rng);
    std::vector<double> x0(dim);
    for (auto& v : x0) v = normal(rng);
    sl.x_in = straight_path_point(x0, s.x1, sl.t);
    sl.target.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) sl.target[i] = s.x1[i] - x0[i];
    sl.cond = condition::condition_dropout(s.cond, cfg.cond_dropout, rng);
    sl.mask = s.mask;
    sl.od_target = s.od_target;
    sl.flow_regularizers = true;
    prepared.push_back(std::move(sl));
  }
  return detail::batch_loss(model, prepared, with_grad);
}

// ------------------------------------------------------------ preprocess --

std::vector<PreparedSample> prepare_samples(
    VectorFieldModel& model, const std::vector<geo::Trajectory>& dataset,
    bool fit_stats) {
  const TrainConfig& cfg = model.config();
  if (dataset.empty())
    throw std::invalid_argument("prepare_samples: empty dataset");

  std::vector<geo::NumericFeatures> feats(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    feats[i] = geo::path_stats(dataset[i]);

  if (fit_stats) {
    NumericStats stats;
    ModeStats mode_stats{};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto raw = feats[i].raw();
      const auto m = static_cast<std::size_t>(dataset[i].mode);
      ++mode_stats.count[m];
      for (std::size_t k = 0; k < 5; ++k) {
        stats.mean[k] += raw[k];
        mode_stats.mean[m][k] += raw[k];
      }
    }
    for (std::size_t k = 0; k < 5; ++k)
      stats.mean[k] /= static_cast<double>(dataset.size());
    for (std::size_t m = 0; m < 5; ++m)
      if (mode_stats.count[m] > 0)
        for (std::size_t k = 0; k < 5; ++k)
          mode_stats.mean[m][k] /= static_cast<double>(mode_stats.count[m]);
    std::array<double, 5> var{};
    std::array<std::array<double, 5>, 5> mode_var{};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto raw = feats[i].raw();
      const auto m = static_cast<std::size_t>(dataset[i].mode);
      for (std::size_t k = 0; k < 5; ++k) {
        var[k] += (raw[k] - stats.mean[k]) * (raw[k] - stats.mean[k]);
        mode_var[m][k] += (raw[k] - mode_stats.mean[m][k]) *
                          (raw[k] - mode_stats.mean[m][k]);
      }
    }
    for (std::size_t k = 0; k < 5; ++k)
      stats.stddev[k] =
          std::max(1e-9, std::sqrt(var[k] / static_cast<double>(dataset.size())));
    for (std::size_t m = 0; m < 5; ++m)
      if (mode_stats.count[m] > 0)
        for (std::size_t k = 0; k < 5; ++k)
          mode_stats.stddev[m][k] = std::max(
              1e-9, std::sqrt(mode_var[m][k] /
                              static_cast<double>(mode_stats.count[m])));
    model.numeric_stats = stats;
    model.mode_stats = mode_stats;
  }

  std::vector<PreparedSample> out(dataset.size());
  util::parallel_for(dataset.size(), [&](std::size_t i) {
    const auto& traj = dataset[i];
    auto [norm_path, frame] = geo::normalize_trajectory(traj);
    geo::Path work = geo::resample_uniform(norm_path, cfg.L);
    geo::Path keypoints = harmonize::rdp_to_k(work, cfg.K);
    PreparedSample s;
    s.x1.reserve(2 * cfg.K);
    for (const auto& p : keypoints) {
      s.x1.push_back(p[0]);
      s.x1.push_back(p[1]);
    }
    s.mask.assign(2 * cfg.K, 1.0);
    s.cond.departure_bin = traj.departure_bin;
    s.cond.origin_zone = traj.od_zone.first;
    s.cond.destination_zone = traj.od_zone.second;
    s.cond.mode = traj.mode;
    s.cond.numeric_raw = feats[i].raw();
    s.cond.numeric_std = model.numeric_stats.standardize(s.cond.numeric_raw);
    const auto& grid = model.grid();
    const auto [fo_lat, fo_lon] = grid.fraction_in_cell(
        traj.od_zone.first, traj.points.front().lat, traj.points.front().lon);
    const auto [fd_lat, fd_lon] = grid.fraction_in_cell(
        traj.od_zone.second, traj.points.back().lat, traj.points.back().lon);
    s.od_target = {fo_lat, fo_lon, fd_lat, fd_lon};
    out[i] = std::move(s);
  });
  return out;
}

// ------------------------------------------------------------- training --

TrainResult train(VectorFieldModel& model,
                  const std::vector<PreparedSample>& train_set,
                  const std::vector<PreparedSample>& val_set,
                  std::mt19937_64& rng, nn::Adam& optimizer) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  const TrainConfig& cfg = model.config();
  const bool ddpm = cfg.paradigm == "ddpm";
  diffusion::NoiseSchedule schedule(cfg.T);
  nn::PlateauScheduler plateau(cfg.plateau_factor, cfg.plateau_patience);

  auto eval_loss = [&](std::span<const PreparedSample> batch, bool grad) {
    return ddpm ? diffusion::ddpm_loss(model, batch, rng, schedule, grad)
                : cfm_loss(model, batch, rng, grad);
  };

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  long steps_since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<PreparedSample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(train_set[order[i]]);
      const double loss = eval_loss(batch, true);
      if (loss > 1e6)
        throw std::runtime_error(
            "train: divergence (loss " + std::to_string(loss) + " at epoch " +
            std::to_string(epoch) + ")");
      optimizer.step();
      ++result.steps;
      ++steps_since_best;
      epoch_loss += loss;
      ++n_batches;
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));

    double val = result.train_loss.back();
    if (!val_set.empty()) val = eval_loss(val_set, false);
    result.val_loss.push_back(val);
    optimizer.set_lr(plateau.step(val, optimizer.lr()));

    if (val < best_val - 1e-6) {
      best_val = val;
      steps_since_best = 0;
    } else if (steps_since_best > static_cast<long>(cfg.early_stop_patience)) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

// ------------------------------------------------------------- sampling --

SampleOut euler_sample(VectorFieldModel& model, const ConditionSpec& spec,
                       std::size_t steps, double guidance_w,
                       std::mt19937_64& rng) {
  if (steps < 1) throw std::invalid_argument("euler_sample: steps must be >= 1");
  if (guidance_w < 0.0)
    throw std::invalid_argument("euler_sample: guidance_w must be >= 0");
  const std::size_t dim = 2 * model.config().K;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(dim);
  for (auto& v : x) v = normal(rng);
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    std::vector<double> v = model.vector_field(x, t, spec);
    if (guidance_w > 0.0) {
      const std::vector<double> vu = model.vector_field(x, t, std::nullopt);
      for (std::size_t j = 0; j < dim; ++j)
        v[j] = (1.0 + guidance_w) * v[j] - guidance_w * vu[j];
    }
    for (std::size_t j = 0; j < dim; ++j) x[j] += dt * v[j];
  }
  return {std::move(x), model.predict_fine_od(spec)};
}

void complete_numeric(VectorFieldModel& model, ConditionSpec& spec,
                      std::mt19937_64& rng) {
  const auto m = static_cast<std::size_t>(spec.mode);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < 5; ++k) {
    if (std::isnan(spec.numeric_raw[k])) {
      const double mu = model.mode_stats.mean[m][k];
      const double sigma = model.mode_stats.stddev[m][k];
      spec.numeric_raw[k] = std::max(1e-6, mu + sigma * normal(rng));
    }
  }
  spec.numeric_std = model.numeric_stats.standardize(spec.numeric_raw);
}

geo::Trajectory assemble_trajectory(VectorFieldModel& model,
                                    const ConditionSpec& spec,
                                    const SampleOut& sample, std::size_t L,
                                    std::mt19937_64& rng) {
  const std::size_t k = model.config().K;
  geo::Path keypoints(k);
  for (std::size_t i = 0; i < k; ++i)
    keypoints[i] = {sample.keypoints[2 * i], sample.keypoints[2 * i + 1]};

  const geo::Path path = geo::resample_uniform(keypoints, L);

  const auto& grid = model.grid();
  const auto [o_lat, o_lon] = grid.point_from_fraction(
      spec.origin_zone, sample.fine_od[0], sample.fine_od[1]);
  const auto [d_lat, d_lon] = grid.point_from_fraction(
      spec.destination_zone, sample.fine_od[2], sample.fine_od[3]);
  const std::array<double, 2> origin{o_lat, o_lon};
  const std::array<double, 2> destination{d_lat, d_lon};

  // OD-anchored affine frame: first/last keypoints land on the predicted
  // fine origin/destination per axis.
  std::array<double, 2> scale, offset;
  for (std::size_t a = 0; a < 2; ++a) {
    const double first = keypoints.front()[a], last = keypoints.back()[a];
    const double denom = last - first;
    if (std::abs(denom) > 1e-6) {
      scale[a] = (destination[a] - origin[a]) / denom;
      offset[a] = origin[a] - scale[a] * first;
    } else {
      const auto cell = grid.cell(spec.origin_zone);
      const double extent =
          a == 0 ? cell.lat_max - cell.lat_min : cell.lon_max - cell.lon_min;
      scale[a] = 0.5 * extent;
      offset[a] = 0.5 * (origin[a] + destination[a]) -
                  scale[a] * 0.5 * (first + last);
    }
  }

  double elapsed = spec.numeric_raw[2];
  if (!(elapsed > 0.0) || std::isnan(elapsed)) elapsed = 600.0;

  geo::Trajectory traj;
  std::uniform_int_distribution<std::uint64_t> token;
  std::ostringstream id;
  id << "gen-" << std::hex << token(rng);
  traj.id = id.str();
  traj.mode = spec.mode;
  traj.departure_bin = spec.departure_bin;
  traj.od_zone = {spec.origin_zone, spec.destination_zone};
  traj.points.reserve(L);
  for (std::size_t j = 0; j < L; ++j) {
    geo::GeoPoint p;
    p.lat = std::clamp(offset[0] + scale[0] * path[j][0], grid.lat_min,
                       grid.lat_max);
    p.lon = std::clamp(offset[1] + scale[1] * path[j][1], grid.lon_min,
                       grid.lon_max);
    p.t = elapsed * static_cast<double>(j) / static_cast<double>(L - 1);
    traj.points.push_back(p);
  }
  return traj;
}

namespace {

bool degenerate_keypoints(const std::vector<double>& x) {
  for (std::size_t i = 2; i < x.size(); ++i)
    if (std::abs(x[i] - x[i % 2]) > 1e-9) return false;
  return true;
}

}  // namespace

geo::Trajectory generate(VectorFieldModel& model, const ConditionSpec& spec,
                         std::size_t L, std::size_t steps, double guidance_w,
                         std::mt19937_64& rng) {
  ConditionSpec completed = spec;
  complete_numeric(model, completed, rng);
  SampleOut sample = euler_sample(model, completed, steps, guidance_w, rng);
  if (degenerate_keypoints(sample.keypoints)) {
    sample = euler_sample(model, completed, steps, guidance_w, rng);
    if (degenerate_keypoints(sample.keypoints))
      throw std::runtime_error("generate: degenerate sampled path");
  }
  for (auto& f : sample.fine_od) f = std::clamp(f, 0.0, 1.0);
  return assemble_trajectory(model, completed, sample, L, rng);
}

// ------------------------------------------------------------ checkpoint --

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void read_doubles(std::istream& in, std::vector<double>& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

constexpr char kMagic[8] = {'T', 'R', 'J', 'F', 'C', 'K', 'P', 'T'};

nlohmann::ordered_json config_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["K"] = cfg.K;
  j["L"] = cfg.L;
  j["blocks"] = cfg.blocks;
  j["width"] = cfg.width;
  j["control_dim"] = cfg.control_dim;
  j["deep_hidden"] = cfg.deep_hidden;
  j["time_freqs"] = cfg.time_freqs;
  j["lambda_od"] = cfg.lambda_od;
  j["cond_dropout"] = cfg.cond_dropout;
  j["smooth_w"] = cfg.smooth_w;
  j["bound_w"] = cfg.bound_w;
  j["seed"] = cfg.seed;
  j["early_stop_patience"] = cfg.early_stop_patience;
  j["plateau_patience"] = cfg.plateau_patience;
  j["plateau_factor"] = cfg.plateau_factor;
  j["paradigm"] = cfg.paradigm;
  j["T"] = cfg.T;
  j["sample_steps"] = cfg.sample_steps;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.K = j.at("K").get<std::size_t>();
  cfg.L = j.at("L").get<std::size_t>();
  cfg.blocks = j.at("blocks").get<std::size_t>();
  cfg.width = j.at("width").get<std::size_t>();
  cfg.control_dim = j.at("control_dim").get<std::size_t>();
  cfg.deep_hidden = j.at("deep_hidden").get<std::size_t>();
  cfg.time_freqs = j.at("time_freqs").get<std::size_t>();
  cfg.lambda_od = j.at("lambda_od").get<double>();
  cfg.cond_dropout = j.at("cond_dropout").get<double>();
  cfg.smooth_w = j.at("smooth_w").get<double>();
  cfg.bound_w = j.at("bound_w").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  cfg.plateau_patience = j.at("plateau_patience").get<int>();
  cfg.plateau_factor = j.at("plateau_factor").get<double>();
  cfg.paradigm = j.at("paradigm").get<std::string>();
  cfg.T = j.at("T").get<int>();
  cfg.sample_steps = j.at("sample_steps").get<std::size_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, VectorFieldModel& model,
                     nn::Adam* optimizer, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  nlohmann::ordered_json header;
  header["format_version"] = 1;
  std::ostringstream hash_hex;
  hash_hex << std::hex << model.arch_hash();
  header["arch_hash"] = hash_hex.str();
  header["seed"] = seed;
  header["step"] = optimizer ? optimizer->step_count() : 0;
  header["config"] = config_json(model.config());
  header["zone_grid"] = nlohmann::json::parse(model.grid().to_json());
  header["numeric_mean"] = model.numeric_stats.mean;
  header["numeric_std"] = model.numeric_stats.stddev;
  header["mode_mean"] = model.mode_stats.mean;
  header["mode_std"] = model.mode_stats.stddev;
  header["mode_count"] = model.mode_stats.count;
  const std::string header_str = header.dump();

  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  for (const auto& p : model.params().all()) {
    write_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (std::size_t d : p->shape) write_u64(out, d);
    write_doubles(out, p->value);
  }
  const std::uint8_t has_adam = optimizer != nullptr ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&has_adam), 1);
  if (optimizer) {
    for (const auto& m : optimizer->moments_m()) write_doubles(out, m);
    for (const auto& v : optimizer->moments_v()) write_doubles(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t header_len = read_u32(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  const auto header = nlohmann::json::parse(header_str);
  if (header.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format version");

  const TrainConfig cfg = config_from_json(header.at("config"));
  const auto grid = zones::ZoneGrid::from_json(header.at("zone_grid").dump());

  LoadedModel loaded;
  loaded.seed = header.at("seed").get<std::uint64_t>();
  loaded.step = header.at("step").get<long>();
  loaded.model = std::make_unique<VectorFieldModel>(cfg, grid, loaded.seed);

  std::ostringstream hash_hex;
  hash_hex << std::hex << loaded.model->arch_hash();
  if (header.at("arch_hash").get<std::string>() != hash_hex.str())
    throw std::invalid_argument("checkpoint architecture-hash mismatch");

  loaded.model->numeric_stats.mean =
      header.at("numeric_mean").get<std::array<double, 5>>();
  loaded.model->numeric_stats.stddev =
      header.at("numeric_std").get<std::array<double, 5>>();
  loaded.model->mode_stats.mean =
      header.at("mode_mean").get<std::array<std::array<double, 5>, 5>>();
  loaded.model->mode_stats.stddev =
      header.at("mode_std").get<std::array<std::array<double, 5>, 5>>();
  loaded.model->mode_stats.count =
      header.at("mode_count").get<std::array<std::size_t, 5>>();

  for (const auto& p : loaded.model->params().all()) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != p->name)
      throw std::runtime_error("checkpoint parameter mismatch: expected " +
                               p->name + ", found " + name);
    const std::uint32_t ndims = read_u32(in);
    std::vector<std::size_t> shape(ndims);
    for (auto& d : shape) d = read_u64(in);
    if (shape != p->shape)
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    read_doubles(in, p->value);
  }
  std::uint8_t has_adam = 0;
  in.read(reinterpret_cast<char*>(&has_adam), 1);
  if (in && has_adam) {
    for (const auto& p : loaded.model->params().all()) {
      std::vector<double> m(p->size());
      read_doubles(in, m);
      loaded.adam_m.push_back(std::move(m));
    }
    for (const auto& p : loaded.model->params().all()) {
      std::vector<double> v(p->size());
      read_doubles(in, v);
      loaded.adam_v.push_back(std::move(v));
    }
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return loaded;
}

}  // namespace trajflow::flow
