#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "crowding/analysis.hpp"
#include "crowding/background.hpp"
#include "crowding/foveation.hpp"
#include "crowding/nn/checkpoint.hpp"
#include "crowding/stimulus.hpp"
#include "crowding/sweep.hpp"

namespace py = pybind11;
using namespace crowding;

namespace {

using Pixels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Pixels to_array(const ImageBuffer& img) {
    Pixels out({img.height(), img.width(), 3});
    std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
    return out;
}

ImageBuffer from_array(const Pixels& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an image array of shape (height, width, 3)");
    ImageBuffer img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data().data(), a.data(), img.data().size());
    return img;
}

Letter letter(const std::string& s) {
    const auto l = s.size() == 1 ? letter_from_char(s[0]) : std::nullopt;
    if (!l) throw ConfigError("unknown letter '" + s + "'");
    return *l;
}

template <typename T>
T named(std::optional<T> v, const std::string& what, const std::string& s) {
    if (!v) throw ConfigError("unknown " + what + " '" + s + "'");
    return *v;
}

FlankerVariant variant(const std::string& s) {
    if (s == "all") return FlankerVariant::All;
    if (s == "exclude_sh") return FlankerVariant::ExcludeSH;
    if (s == "only_sh") return FlankerVariant::OnlySH;
    throw ConfigError("unknown flanker variant '" + s + "' (all, exclude_sh, only_sh)");
}

py::dict curve_dict(const SpacingCurve& c) {
    std::vector<int> d;
    std::vector<double> acc;
    std::vector<std::size_t> n;
    for (const auto& p : c.points) {
        d.push_back(p.distance);
        acc.push_back(p.accuracy());
        n.push_back(p.tally.total);
    }
    py::dict out;
    out["distances"] = d;
    out["accuracy"] = acc;
    out["trials"] = n;
    out["unflanked_accuracy"] = c.unflanked_accuracy();
    return out;
}

py::dict fit_dict(const PsychometricFit& f) {
    py::dict out;
    out["mu"] = f.mu;
    out["sigma"] = f.sigma;
    out["floor"] = f.floor;
    out["ceiling"] = f.ceiling;
    out["residual"] = f.residual;
    out["floor_fixed"] = f.floor_fixed;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Crowding stimulus synthesis, foveation, classification and analysis";

    // Derived errors (placement, format, sweep) translate through their base.
    // ShapeError derives from std::invalid_argument and maps to ValueError.
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    m.def("acuity_scales", &acuity_scales, py::arg("n_steps") = 20, py::arg("min_acuity") = 0.2);
    m.def(
        "apply_acuity",
        [](const Pixels& image, int n_steps, double min_acuity) {
            return to_array(apply_acuity(from_array(image), AcuityProfile::make(n_steps, min_acuity)));
        },
        py::arg("image"), py::arg("n_steps") = 20, py::arg("min_acuity") = 0.2);

    m.def(
        "render_stimulus",
        [](const std::string& target, std::optional<std::string> flanker, const std::string& mode, int size_pt,
           int spacing_px, int angle_deg, const std::string& side, int eccentricity_px, const std::string& target_polarity,
           const std::string& flanker_polarity, int width, int height, bool acuity) {
            StimulusSpec s;
            s.target = letter(target);
            s.mode = named(mode_from_name(mode), "mode", mode);
            if (flanker) s.flanker = letter(*flanker);
            if ((s.mode == FlankMode::Unflanked) != !s.flanker)
                throw ConfigError("a flanker is required exactly when mode is single or pair");
            s.size_pt = size_pt;
            s.spacing_px = spacing_px;
            s.angle_deg = angle_deg;
            s.side = named(side_from_name(side), "side", side);
            s.eccentricity_px = eccentricity_px;
            s.target_polarity = named(polarity_from_name(target_polarity), "polarity", target_polarity);
            s.flanker_polarity = named(polarity_from_name(flanker_polarity), "polarity", flanker_polarity);
            SceneSettings scene;
            scene.canvas = {width, height};
            ImageBuffer img = compose_scene(s, scene);
            if (acuity) img = apply_acuity(img, AcuityProfile::make());
            return to_array(img);
        },
        py::arg("target"), py::arg("flanker") = py::none(), py::arg("mode") = "unflanked", py::arg("size_pt") = 20,
        py::arg("spacing_px") = 0, py::arg("angle_deg") = 0, py::arg("side") = "left", py::arg("eccentricity_px") = 56,
        py::arg("target_polarity") = "white", py::arg("flanker_polarity") = "white", py::arg("width") = 224,
        py::arg("height") = 224, py::arg("acuity") = false);

    m.def(
        "synth_background",
        [](int class_id, std::uint64_t seed, int width, int height) {
            return to_array(synth_background(class_id, seed, {width, height}));
        },
        py::arg("class_id"), py::arg("seed"), py::arg("width") = 224, py::arg("height") = 224);

    m.def(
        "flanked_count",
        [](const std::string& mode) {
            GridConfig g;
            g.mode = named(mode_from_name(mode), "mode", mode);
            return g.flanked_count();
        },
        py::arg("mode") = "pair");

    py::class_<nn::Network>(m, "Model")
        .def_static(
            "load", [](const std::filesystem::path& p) { return nn::load_checkpoint(p).network; }, py::arg("path"))
        .def_property_readonly("input_shape", &nn::Network::input_shape)
        .def_property_readonly("parameter_count", &nn::Network::parameter_count)
        .def(
            "predict", [](const nn::Network& net, const Pixels& image) { return nn::predict(net, from_array(image)); },
            py::arg("image"));

    m.def(
        "spacing_curve",
        [](const std::filesystem::path& records, const std::string& v) {
            return curve_dict(accuracy_by_spacing(read_records(records), variant(v)));
        },
        py::arg("records"), py::arg("variant") = "all");

    m.def("psychometric", &psychometric, py::arg("distance"), py::arg("mu"), py::arg("sigma"), py::arg("floor"),
          py::arg("ceiling"));
    m.def(
        "fit_psychometric",
        [](const std::vector<double>& d, const std::vector<double>& a, bool fixed) {
            return fit_dict(fit_psychometric(d, a, fixed));
        },
        py::arg("distances"), py::arg("accuracies"), py::arg("fix_floor_to_chance") = false);
    m.def("bouma_theoretical", &bouma_theoretical, py::arg("eccentricity_px"));
    m.def(
        "spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) { return spearman_correlation(x, y); },
        py::arg("x"), py::arg("y"));
}
