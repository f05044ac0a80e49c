#include "cli.hpp"
#include "vise/checkpoint.hpp"
#include "vise/config.hpp"
#include "vise/eval.hpp"
#include "vise/geometry.hpp"
#include "vise/imgproc.hpp"
#include "vise/render.hpp"
#include "vise/training.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace vise;

namespace {

using Sections = std::vector<std::tuple<double, double, double>>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

geometry::ArmConfiguration make_config(const Sections& sections) {
  std::vector<geometry::PccSection> out;
  for (const auto& [kappa, phi, length] : sections) out.emplace_back(kappa, phi, length);
  return geometry::ArmConfiguration(std::move(out));
}

py::array_t<double> to_array(const geometry::RigidTransform& t) {
  py::array_t<double> a({4, 4});
  auto r = a.mutable_unchecked<2>();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = i < 3 ? (j < 3 ? t.rotation(i, j) : t.translation(i)) : (j == 3 ? 1.0 : 0.0);
  return a;
}

ImageBuffer to_image(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("image must be a 2-D uint8 array");
  const auto* p = a.data();
  return ImageBuffer(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                     std::vector<std::uint8_t>(p, p + a.size()));
}

U8Array to_array(const ImageBuffer& img) {
  U8Array a({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), a.mutable_data());
  return a;
}

template <typename T>
T parse(const std::string& text) {
  return Json::parse(text).get<T>();
}

class Model {
public:
  explicit Model(const std::string& path) : ckpt_(checkpoint::load(path)) {}

  std::string representation() const { return geometry::to_string(ckpt_.meta.representation); }
  double scale() const { return ckpt_.meta.scale; }
  std::string metadata_json() const { return Json(ckpt_.meta.extra).dump(); }

  std::vector<double> predict(const U8Array& view0, const U8Array& view1, bool preprocessed) const {
    std::array<std::array<ImageBuffer, 2>, 1> pairs{{{to_image(view0), to_image(view1)}}};
    if (!preprocessed) {
      for (int cam = 0; cam < 2; ++cam) {
        auto& img = pairs[0][static_cast<std::size_t>(cam)];
        img = imgproc::preprocess(img, ckpt_.meta.preprocess, cam);
      }
    }
    const auto labels = eval::predict_labels(ckpt_.network, ckpt_.meta, pairs);
    return {labels[0].values.begin(), labels[0].values.end()};
  }

private:
  checkpoint::Checkpoint ckpt_;
};

}  // namespace

PYBIND11_MODULE(_vise, m) {
  m.doc() = "Continuum-arm shape estimation from two camera views.";

  m.def(
      "fk_chain",
      [](const Sections& sections) {
        std::vector<py::array_t<double>> out;
        for (const auto& t : geometry::fk_chain(make_config(sections))) out.push_back(to_array(t));
        return out;
      },
      py::arg("sections"), "Section end frames as 4x4 arrays; sections are (curvature, phi, length) tuples.");

  m.def(
      "key_points",
      [](const Sections& sections, std::size_t count) {
        const auto pts = geometry::key_points(make_config(sections), count);
        py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
        auto r = a.mutable_unchecked<2>();
        for (std::size_t i = 0; i < pts.size(); ++i)
          for (int k = 0; k < 3; ++k) r(static_cast<py::ssize_t>(i), k) = pts[i][k];
        return a;
      },
      py::arg("sections"), py::arg("count"));

  m.def(
      "desk_config_json", [](std::uint64_t seed) { return Json(config::desk_config(seed)).dump(); },
      py::arg("seed") = 7);

  m.def(
      "render_view",
      [](const std::string& scene_json, int camera, const Sections& sections) {
        return to_array(render::render_view(parse<render::SceneSpec>(scene_json), camera, make_config(sections)));
      },
      py::arg("scene_json"), py::arg("camera"), py::arg("sections"));

  m.def(
      "preprocess",
      [](const U8Array& image, const std::string& spec_json, int camera) {
        return to_array(imgproc::preprocess(to_image(image), parse<imgproc::PreprocessSpec>(spec_json), camera));
      },
      py::arg("image"), py::arg("spec_json"), py::arg("camera"));

  m.def(
      "lr_at", [](const std::string& train_json, int epoch) {
        return training::lr_at(parse<training::TrainConfig>(train_json), epoch);
      },
      py::arg("train_json"), py::arg("epoch"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args, std::optional<std::string> env_seed) {
        std::vector<const char*> argv{"vise"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err,
                                  env_seed ? env_seed->c_str() : nullptr);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), py::arg("env_seed") = py::none(), "Runs the command line in process: (exit code, stdout, stderr).");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def_property_readonly("representation", &Model::representation)
      .def_property_readonly("scale", &Model::scale)
      .def("metadata_json", &Model::metadata_json)
      .def("predict", &Model::predict, py::arg("view0"), py::arg("view1"), py::arg("preprocessed") = false,
           "Label values in millimetres (points) or curvature/phi pairs (pcc).");

  py::register_exception<checkpoint::CheckpointError>(m, "WeightFileError", PyExc_ValueError);
}
