// trajflow: dataset synthesis, compression benchmarking, training,
// generation and evaluation for the trajectory pipeline.
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime/numeric failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajflow/dataset.hpp"
#include "trajflow/diffusion.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/harmonize.hpp"
#include "trajflow/metrics.hpp"
#include "trajflow/synth.hpp"
#include "trajflow/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace trajflow;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

ordered_json manifest_base(const std::string& command, std::uint64_t seed) {
  ordered_json m;
  m["command"] = command;
  m["seed"] = seed;
  m["inputs"] = ordered_json::object();
  m["outputs"] = ordered_json::object();
  m["timing"] = ordered_json::object();
  return m;
}

void record_output(ordered_json& manifest, const std::string& path) {
  std::ostringstream hash;
  hash << std::hex << dataset::file_hash(path);
  manifest["outputs"][path] = hash.str();
}

void record_input(ordered_json& manifest, const std::string& path) {
  std::ostringstream hash;
  hash << std::hex << dataset::file_hash(path);
  manifest["inputs"][path] = hash.str();
}

void write_manifest(const ordered_json& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << manifest.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

std::vector<geo::Trajectory> select_by_ids(
    const std::vector<geo::Trajectory>& data,
    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const geo::Trajectory*> by_id;
  for (const auto& t : data) by_id[t.id] = &t;
  std::vector<geo::Trajectory> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::invalid_argument("split references unknown id: " + id);
    out.push_back(*it->second);
  }
  return out;
}

// ------------------------------------------------------------------ synth --

int cmd_synth(std::uint64_t seed, const std::string& scale_str, std::size_t n,
              const std::string& out_dir) {
  Stopwatch timer;
  const synth::WorldScale scale = synth::scale_from_string(scale_str);
  fs::create_directories(out_dir);
  const synth::World world = synth::make_world(seed, scale);
  const auto data = synth::make_dataset(world, n, seed);
  const auto split = synth::default_split(data);

  const std::string data_path = out_dir + "/dataset.jsonl";
  const std::string split_path = out_dir + "/split.json";
  const std::string world_path = out_dir + "/world.json";
  dataset::write_jsonl(data_path, data);
  dataset::write_split(split_path, {split.train, split.val, split.test});
  world.grid.save(world_path);

  ordered_json manifest = manifest_base("synth", seed);
  manifest["config"] = {{"scale", scale_str}, {"n", n}};
  record_output(manifest, data_path);
  record_output(manifest, split_path);
  record_output(manifest, world_path);
  manifest["timing"]["total_sec"] = timer.seconds();
  manifest["timing"]["per_sample_sec"] =
      timer.seconds() / static_cast<double>(n);
  write_manifest(manifest, out_dir + "/manifest.json");
  std::cout << "wrote " << n << " trajectories to " << data_path << '\n';
  return 0;
}

// -------------------------------------------------------- compress-bench --

int cmd_compress_bench(const std::string& data_path,
                       const std::string& methods_arg,
                       const std::string& ks_arg, const std::string& out_path) {
  Stopwatch timer;
  std::vector<harmonize::Method> methods;
  if (methods_arg == "all") {
    methods = harmonize::all_methods();
  } else {
    std::stringstream ss(methods_arg);
    std::string token;
    while (std::getline(ss, token, ','))
      methods.push_back(harmonize::method_from_string(token));
  }
  std::vector<std::size_t> ks;
  {
    std::stringstream ss(ks_arg);
    std::string token;
    while (std::getline(ss, token, ','))
      ks.push_back(static_cast<std::size_t>(std::stoull(token)));
  }
  const auto data = dataset::read_jsonl(data_path);
  const auto rows = harmonize::compression_benchmark(data, methods, ks);
  write_text(out_path, harmonize::benchmark_csv(rows));

  ordered_json manifest = manifest_base("compress-bench", 0);
  manifest["config"] = {{"methods", methods_arg}, {"ks", ks_arg}};
  record_input(manifest, data_path);
  record_output(manifest, out_path);
  manifest["timing"]["total_sec"] = timer.seconds();
  manifest["timing"]["per_sample_sec"] =
      timer.seconds() / static_cast<double>(std::max<std::size_t>(1, data.size()));
  write_manifest(manifest, out_path + ".manifest.json");
  std::cout << "wrote " << rows.size() << " benchmark rows to " << out_path
            << '\n';
  return 0;
}

// ------------------------------------------------------------------ train --

int cmd_train(const std::string& data_path, const std::string& split_path,
              const std::string& world_path, const std::string& config_path,
              const std::string& paradigm, const std::string& out_dir,
              const std::string& resume_path) {
  Stopwatch timer;
  flow::TrainConfig cfg = config_path.empty()
                              ? flow::TrainConfig{}
                              : flow::parse_train_config(config_path);
  if (!paradigm.empty()) {
    if (paradigm != "flow" && paradigm != "ddpm")
      throw std::invalid_argument("paradigm must be flow or ddpm");
    cfg.paradigm = paradigm;
  }
  fs::create_directories(out_dir);

  const auto data = dataset::read_jsonl(data_path);
  const auto split = dataset::read_split(split_path);
  const auto grid = zones::ZoneGrid::load(world_path);

  std::unique_ptr<flow::VectorFieldModel> model;
  long resume_step = 0;
  flow::LoadedModel loaded;
  if (!resume_path.empty()) {
    loaded = flow::load_checkpoint(resume_path);
    model = std::move(loaded.model);
    cfg = model->config();
    resume_step = loaded.step;
  } else {
    model = std::make_unique<flow::VectorFieldModel>(cfg, grid, cfg.seed);
  }

  const auto train_ds = select_by_ids(data, split.train);
  const auto val_ds = select_by_ids(data, split.val);
  const auto train_samples =
      flow::prepare_samples(*model, train_ds, resume_path.empty());
  const auto val_samples = flow::prepare_samples(*model, val_ds, false);

  nn::Adam optimizer(model->params(), {cfg.lr});
  if (!resume_path.empty() && !loaded.adam_m.empty()) {
    optimizer.moments_m() = loaded.adam_m;
    optimizer.moments_v() = loaded.adam_v;
    optimizer.set_step_count(resume_step);
  }

  std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(resume_step) + 1);
  const flow::TrainResult result =
      flow::train(*model, train_samples, val_samples, rng, optimizer);

  const std::string ckpt_path = out_dir + "/checkpoint.bin";
  flow::save_checkpoint(ckpt_path, *model, &optimizer, cfg.seed);

  std::ostringstream loss_csv;
  loss_csv.precision(10);
  loss_csv << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    loss_csv << e << ',' << result.train_loss[e] << ',' << result.val_loss[e]
             << '\n';
  const std::string loss_path = out_dir + "/loss.csv";
  write_text(loss_path, loss_csv.str());

  ordered_json manifest = manifest_base("train", cfg.seed);
  manifest["config"] =
      nlohmann::json::parse("{}");  // replaced below with the full snapshot
  {
    ordered_json c;
    std::istringstream cfg_lines(flow::train_config_to_string(cfg));
    std::string line;
    while (std::getline(cfg_lines, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos)
        c[line.substr(0, eq)] = line.substr(eq + 3);
    }
    manifest["config"] = c;
  }
  record_input(manifest, data_path);
  record_input(manifest, split_path);
  record_input(manifest, world_path);
  record_output(manifest, ckpt_path);
  record_output(manifest, loss_path);
  manifest["steps"] = optimizer.step_count();
  manifest["early_stopped"] = result.early_stopped;
  manifest["timing"]["total_sec"] = timer.seconds();
  manifest["timing"]["per_sample_sec"] =
      timer.seconds() / static_cast<double>(std::max<std::size_t>(
                            1, train_samples.size() * result.train_loss.size()));
  write_manifest(manifest, out_dir + "/manifest.json");
  std::cout << "trained " << optimizer.step_count() << " steps, final val loss "
            << (result.val_loss.empty() ? 0.0 : result.val_loss.back()) << '\n';
  return 0;
}

// --------------------------------------------------------------- generate --

int cmd_generate(const std::string& model_path,
                 const std::string& conditions_path, bool from_test_split,
                 const std::string& data_path, const std::string& split_path,
                 std::size_t n, std::size_t steps, double guidance,
                 std::uint64_t seed, const std::string& out_dir) {
  Stopwatch total_timer;
  auto loaded = flow::load_checkpoint(model_path);
  flow::VectorFieldModel& model = *loaded.model;
  const bool ddpm = model.config().paradigm == "ddpm";
  fs::create_directories(out_dir);

  std::vector<condition::ConditionSpec> specs;
  if (from_test_split) {
    if (data_path.empty() || split_path.empty())
      throw std::invalid_argument(
          "--from-test-split requires --data and --split");
    const auto data = dataset::read_jsonl(data_path);
    const auto split = dataset::read_split(split_path);
    const auto test_ds = select_by_ids(data, split.test);
    if (test_ds.empty())
      throw std::invalid_argument("test split is empty");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = test_ds[i % test_ds.size()];
      condition::ConditionSpec s;
      s.departure_bin = t.departure_bin;
      s.origin_zone = t.od_zone.first;
      s.destination_zone = t.od_zone.second;
      s.mode = t.mode;
      s.numeric_raw = geo::path_stats(t).raw();
      specs.push_back(s);
    }
  } else {
    if (conditions_path.empty())
      throw std::invalid_argument(
          "either --conditions or --from-test-split is required");
    std::ifstream in(conditions_path);
    if (!in)
      throw std::invalid_argument("cannot open conditions file: " +
                                  conditions_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      specs.push_back(condition::spec_from_json(line));
    }
    if (specs.empty())
      throw std::invalid_argument("conditions file is empty");
    const std::size_t base = specs.size();
    while (specs.size() < n) specs.push_back(specs[specs.size() % base]);
    if (n > 0 && specs.size() > n) specs.resize(n);
  }

  std::mt19937_64 rng(seed);
  diffusion::NoiseSchedule schedule(model.config().T);
  std::vector<geo::Trajectory> generated;
  generated.reserve(specs.size());
  Stopwatch sampling_timer;
  for (const auto& spec : specs) {
    condition::validate_spec(spec, model.encoder().vocab());
    geo::Trajectory t =
        ddpm ? diffusion::ddpm_generate(model, spec, model.config().L, steps,
                                        schedule, rng)
             : flow::generate(model, spec, model.config().L, steps, guidance,
                              rng);
    generated.push_back(std::move(t));
  }
  const double sampling_sec = sampling_timer.seconds();

  const std::string out_path = out_dir + "/generated.jsonl";
  dataset::write_jsonl(out_path, generated);

  ordered_json manifest = manifest_base("generate", seed);
  manifest["config"] = {{"paradigm", model.config().paradigm},
                        {"steps", steps},
                        {"guidance", guidance},
                        {"n", generated.size()}};
  record_input(manifest, model_path);
  record_output(manifest, out_path);
  manifest["timing"]["sampling_sec"] = sampling_sec;
  manifest["timing"]["per_sample_sec"] =
      sampling_sec / static_cast<double>(std::max<std::size_t>(1, generated.size()));
  manifest["timing"]["total_sec"] = total_timer.seconds();
  write_manifest(manifest, out_dir + "/manifest.json");
  std::cout << "generated " << generated.size() << " trajectories to "
            << out_path << '\n';
  return 0;
}

// ------------------------------------------------------------------- eval --

int cmd_eval(const std::string& real_path, const std::string& generated_path,
             std::size_t bins, const std::string& out_path) {
  Stopwatch timer;
  const auto real = dataset::read_jsonl(real_path);
  const auto generated = dataset::read_jsonl(generated_path);

  auto bbox = [](const std::vector<geo::Trajectory>& data) {
    std::array<double, 4> b{90.0, -90.0, 180.0, -180.0};
    for (const auto& t : data)
      for (const auto& p : t.points) {
        b[0] = std::min(b[0], p.lat);
        b[1] = std::max(b[1], p.lat);
        b[2] = std::min(b[2], p.lon);
        b[3] = std::max(b[3], p.lon);
      }
    return b;
  };
  const auto br = bbox(real);
  const auto bg = bbox(generated);
  if (br[0] > bg[1] || bg[0] > br[1] || br[2] > bg[3] || bg[2] > br[3])
    throw std::runtime_error(
        "real and generated bounding boxes do not intersect; real lat [" +
        std::to_string(br[0]) + "," + std::to_string(br[1]) +
        "] vs generated lat [" + std::to_string(bg[0]) + "," +
        std::to_string(bg[1]) + "]");
  const double lat_min = std::min(br[0], bg[0]);
  const double lat_max = std::max(br[1], bg[1]);
  const double lon_min = std::min(br[2], bg[2]);
  const double lon_max = std::max(br[3], bg[3]);

  const auto report = metrics::evaluate(real, generated, lat_min, lat_max,
                                        lon_min, lon_max, bins);

  auto per_mode_mean = [](const std::vector<geo::Trajectory>& data) {
    std::array<double, 5> sum{};
    std::array<std::size_t, 5> count{};
    for (const auto& t : data) {
      const auto m = static_cast<std::size_t>(t.mode);
      sum[m] += geo::path_stats(t).cumulative_distance;
      ++count[m];
    }
    ordered_json out;
    for (std::size_t m = 0; m < 5; ++m)
      if (count[m] > 0)
        out[geo::mode_to_string(static_cast<geo::TransportMode>(m))] =
            sum[m] / static_cast<double>(count[m]);
    return out;
  };

  ordered_json out = nlohmann::json::parse(metrics::report_json(report));
  out["per_mode_mean_distance_km"] = {{"real", per_mode_mean(real)},
                                      {"generated", per_mode_mean(generated)}};
  out["timing"] = {{"total_sec", timer.seconds()}};
  write_text(out_path, out.dump(2) + "\n");
  std::cout << "density_js " << report.density_js << ", dtw median "
            << report.dtw_stats.median << " km, report at " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory generation pipeline"};
  app.require_subcommand(1);

  // synth
  std::uint64_t synth_seed = 0;
  std::string synth_scale = "urban";
  std::size_t synth_n = 1000;
  std::string synth_out = "out";
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a dataset");
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--scale", synth_scale, "urban | metro | nationwide");
  synth_cmd->add_option("--n", synth_n)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_out)->required();

  // compress-bench
  std::string cb_data, cb_methods = "all", cb_ks = "5,10,20,30", cb_out;
  auto* cb_cmd =
      app.add_subcommand("compress-bench", "compression benchmark CSV");
  cb_cmd->add_option("--data", cb_data)->required();
  cb_cmd->add_option("--methods", cb_methods, "comma list or 'all'");
  cb_cmd->add_option("--ks", cb_ks, "comma list of keypoint budgets");
  cb_cmd->add_option("--out", cb_out)->required();

  // train
  std::string tr_data, tr_split, tr_world, tr_config, tr_paradigm, tr_out,
      tr_resume;
  auto* tr_cmd = app.add_subcommand("train", "train a model");
  tr_cmd->add_option("--data", tr_data)->required();
  tr_cmd->add_option("--split", tr_split)->required();
  tr_cmd->add_option("--world", tr_world)->required();
  tr_cmd->add_option("--config", tr_config);
  tr_cmd->add_option("--paradigm", tr_paradigm, "flow | ddpm");
  tr_cmd->add_option("--out", tr_out)->required();
  tr_cmd->add_option("--resume", tr_resume, "checkpoint to continue from");

  // generate
  std::string gen_model, gen_conditions, gen_data, gen_split, gen_out;
  bool gen_from_test = false;
  std::size_t gen_n = 100, gen_steps = 10;
  double gen_guidance = 0.0;
  std::uint64_t gen_seed = 0;
  auto* gen_cmd = app.add_subcommand("generate", "sample trajectories");
  gen_cmd->add_option("--model", gen_model)->required();
  gen_cmd->add_option("--conditions", gen_conditions,
                      "JSONL file of condition objects");
  gen_cmd->add_flag("--from-test-split", gen_from_test);
  gen_cmd->add_option("--data", gen_data);
  gen_cmd->add_option("--split", gen_split);
  gen_cmd->add_option("--n", gen_n)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--steps", gen_steps)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--guidance", gen_guidance);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--out", gen_out)->required();

  // eval
  std::string ev_real, ev_generated, ev_out;
  std::size_t ev_bins = 64;
  auto* ev_cmd = app.add_subcommand("eval", "compare real vs generated");
  ev_cmd->add_option("--real", ev_real)->required();
  ev_cmd->add_option("--generated", ev_generated)->required();
  ev_cmd->add_option("--bins", ev_bins)->check(CLI::PositiveNumber);
  ev_cmd->add_option("--out", ev_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth_seed, synth_scale, synth_n, synth_out);
    if (cb_cmd->parsed())
      return cmd_compress_bench(cb_data, cb_methods, cb_ks, cb_out);
    if (tr_cmd->parsed())
      return cmd_train(tr_data, tr_split, tr_world, tr_config, tr_paradigm,
                       tr_out, tr_resume);
    if (gen_cmd->parsed())
      return cmd_generate(gen_model, gen_conditions, gen_from_test, gen_data,
                          gen_split, gen_n, gen_steps, gen_guidance, gen_seed,
                          gen_out);
    if (ev_cmd->parsed())
      return cmd_eval(ev_real, ev_generated, ev_bins, ev_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
