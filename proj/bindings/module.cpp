#include <algorithm>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trajflow/condition.hpp"
#include "trajflow/dataset.hpp"
#include "trajflow/diffusion.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/harmonize.hpp"
#include "trajflow/metrics.hpp"
#include "trajflow/synth.hpp"

namespace py = pybind11;
using namespace trajflow;

namespace {

geo::Trajectory traj_from_dict(const py::dict& d) {
  return dataset::trajectory_from_json_line(
      py::str(py::module_::import("json").attr("dumps")(d)));
}

py::object traj_to_dict(const geo::Trajectory& t) {
  return py::module_::import("json").attr("loads")(
      dataset::trajectory_to_json_line(t));
}

}  // namespace

PYBIND11_MODULE(trajflow_py, m) {
  m.doc() = "trajectory generation pipeline bindings";

  py::class_<geo::Trajectory>(m, "Trajectory")
      .def_static("from_dict", &traj_from_dict)
      .def("to_dict", &traj_to_dict)
      .def("validate", &geo::Trajectory::validate)
      .def_readonly("id", &geo::Trajectory::id);

  m.def("read_jsonl", &dataset::read_jsonl);
  m.def("write_jsonl", &dataset::write_jsonl);

  m.def("rdp", &harmonize::rdp, py::arg("path"), py::arg("epsilon"));
  m.def("rdp_to_k", &harmonize::rdp_to_k, py::arg("path"), py::arg("k"));
  m.def("dtw", &metrics::dtw);
  m.def("frechet", &metrics::frechet);
  m.def("haversine_km",
        py::overload_cast<double, double, double, double>(&geo::haversine_km));

  m.def("make_dataset",
        [](std::uint64_t seed, const std::string& scale, std::size_t n) {
          const auto world =
              synth::make_world(seed, synth::scale_from_string(scale));
          const auto data = synth::make_dataset(world, n, seed);
          py::list out;
          for (const auto& t : data) out.append(traj_to_dict(t));
          return out;
        },
        py::arg("seed"), py::arg("scale"), py::arg("n"));

  m.def("evaluate",
        [](const std::string& real_path, const std::string& generated_path,
           std::size_t bins) {
          const auto real = dataset::read_jsonl(real_path);
          const auto gen = dataset::read_jsonl(generated_path);
          double lat_min = 90, lat_max = -90, lon_min = 180, lon_max = -180;
          for (const auto* ds : {&real, &gen})
            for (const auto& t : *ds)
              for (const auto& p : t.points) {
                lat_min = std::min(lat_min, p.lat);
                lat_max = std::max(lat_max, p.lat);
                lon_min = std::min(lon_min, p.lon);
                lon_max = std::max(lon_max, p.lon);
              }
          const auto report = metrics::evaluate(real, gen, lat_min, lat_max,
                                                lon_min, lon_max, bins);
          return py::module_::import("json").attr("loads")(
              metrics::report_json(report));
        },
        py::arg("real_path"), py::arg("generated_path"), py::arg("bins") = 64);

  m.def("train_and_generate",
        [](const std::string& data_path, const std::string& split_path,
           const std::string& world_path, const std::string& checkpoint_path,
           std::size_t epochs, std::size_t n_generate) {
          flow::TrainConfig cfg;
          cfg.epochs = epochs;
          cfg.blocks = 2;
          cfg.width = 64;
          cfg.control_dim = 32;
          cfg.deep_hidden = 64;
          cfg.time_freqs = 16;
          const auto data = dataset::read_jsonl(data_path);
          const auto split = dataset::read_split(split_path);
          const auto grid = zones::ZoneGrid::load(world_path);
          flow::VectorFieldModel model(cfg, grid, cfg.seed);
          std::vector<geo::Trajectory> train_ds;
          for (const auto& t : data)
            if (std::find(split.train.begin(), split.train.end(), t.id) !=
                split.train.end())
              train_ds.push_back(t);
          auto samples = flow::prepare_samples(model, train_ds, true);
          nn::Adam opt(model.params(), {cfg.lr});
          std::mt19937_64 rng(cfg.seed);
          flow::train(model, samples, {}, rng, opt);
          flow::save_checkpoint(checkpoint_path, model, &opt, cfg.seed);
          py::list out;
          for (std::size_t i = 0; i < n_generate; ++i) {
            const auto& src = train_ds[i % train_ds.size()];
            condition::ConditionSpec spec;
            spec.departure_bin = src.departure_bin;
            spec.origin_zone = src.od_zone.first;
            spec.destination_zone = src.od_zone.second;
            spec.mode = src.mode;
            spec.numeric_raw = geo::path_stats(src).raw();
            out.append(traj_to_dict(
                flow::generate(model, spec, cfg.L, cfg.sample_steps, 0.0, rng)));
          }
          return out;
        },
        py::arg("data_path"), py::arg("split_path"), py::arg("world_path"),
        py::arg("checkpoint_path"), py::arg("epochs") = 3,
        py::arg("n_generate") = 4);
}
