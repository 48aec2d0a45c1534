#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "livorlab/extinction.hpp"
#include "livorlab/inverse.hpp"
#include "livorlab/json_io.hpp"
#include "livorlab/lut.hpp"
#include "livorlab/mie.hpp"

namespace py = pybind11;
using namespace livorlab;

namespace {

// Structured arguments cross the boundary as plain dicts, converted through
// JSON so they share the field names and validation of the C++ types.
Json to_cpp(const py::object& obj) {
  return parse_json(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<spectral::ExtinctionRecord> extinction_db(const std::optional<std::filesystem::path>& path) {
  return extinction::load_extinction_db(path);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "livorlab core: spectra, Mie scattering, Monte Carlo transport, LUTs and fitting";
  m.attr("__version__") = LIVORLAB_PY_VERSION;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<spectral::Spectrum>(m, "Spectrum")
      .def(py::init([](std::vector<double> wl, std::vector<double> v, const std::string& kind) {
             return spectral::Spectrum(std::move(wl), std::move(v), spectral::spectrum_kind_from_string(kind));
           }),
           py::arg("wavelengths_nm"), py::arg("values"), py::arg("kind") = "Reflectance")
      .def_property_readonly("wavelengths_nm",
                             [](const spectral::Spectrum& s) {
                               return std::vector<double>(s.wavelengths().begin(), s.wavelengths().end());
                             })
      .def_property_readonly(
          "values", [](const spectral::Spectrum& s) { return std::vector<double>(s.values().begin(), s.values().end()); })
      .def_property_readonly("kind", [](const spectral::Spectrum& s) { return std::string(spectral::to_string(s.kind())); })
      .def("__len__", &spectral::Spectrum::size)
      .def("__eq__", [](const spectral::Spectrum& a, const spectral::Spectrum& b) { return a == b; })
      .def("__repr__", [](const spectral::Spectrum& s) {
        return "<Spectrum " + std::string(spectral::to_string(s.kind())) + " " + std::to_string(s.size()) + " points>";
      });

  m.def(
      "normalize_reflectance",
      [](const spectral::Spectrum& sample, const spectral::Spectrum& white, const spectral::Spectrum& dark) {
        auto r = spectral::normalize_reflectance(sample, white, dark);
        return py::make_tuple(r.reflectance, r.clamped, r.above_unity);
      },
      py::arg("sample"), py::arg("white"), py::arg("dark"),
      "R = (S - D) / (W - D). Returns (reflectance, clamped flags, above-unity flags).");

  m.def(
      "load_extinction_db",
      [](const std::optional<std::filesystem::path>& path) {
        py::dict out;
        for (const auto& rec : extinction_db(path)) out[py::str(std::string(spectral::to_string(rec.chromophore)))] = rec.extinction;
        return out;
      },
      py::arg("path") = py::none());

  m.def(
      "absorption_spectrum",
      [](const py::dict& concentrations, const std::vector<double>& grid,
         const std::optional<std::filesystem::path>& table) {
        const auto conc = to_cpp(concentrations).get<spectral::ChromophoreConcentrations>();
        return spectral::absorption_spectrum(conc, extinction_db(table), grid);
      },
      py::arg("concentrations"), py::arg("grid"), py::arg("extinction_table") = py::none(),
      "mu_a in 1/mm from concentrations in mmol/L, e.g. {'Hb': 0.02, 'O2Hb': 0.02, 'COHb': 0.01}.");

  m.def(
      "cohb_fraction",
      [](const py::dict& concentrations) {
        return spectral::cohb_fraction(to_cpp(concentrations).get<spectral::ChromophoreConcentrations>());
      },
      py::arg("concentrations"));

  py::class_<mie::MieResult>(m, "MieResult")
      .def_readonly("q_ext", &mie::MieResult::q_ext)
      .def_readonly("q_sca", &mie::MieResult::q_sca)
      .def_readonly("g", &mie::MieResult::anisotropy_g);

  m.def(
      "mie_single", [](double x, std::complex<double> index) { return mie::mie_single({x, index}); },
      py::arg("size_parameter"), py::arg("relative_index"));

  m.def(
      "bulk_scattering",
      [](const py::dict& scatterer, double wavelength_nm) {
        const auto b = mie::bulk_scattering(to_cpp(scatterer).get<mie::ScattererModel>(), wavelength_nm);
        return py::make_tuple(b.mu_s_per_mm, b.g);
      },
      py::arg("scatterer"), py::arg("wavelength_nm"), "(mu_s in 1/mm, g) of a sphere population.");

  py::class_<mcrt::Layer>(m, "Layer")
      .def(py::init([](double mu_a, double mu_s, double g, double n, std::optional<double> thickness_mm) {
             return mcrt::Layer{mu_a, mu_s, g, n, thickness_mm.value_or(mcrt::kInfiniteThickness)};
           }),
           py::arg("mu_a"), py::arg("mu_s"), py::arg("g") = 0.0, py::arg("n") = 1.0,
           py::arg("thickness_mm") = py::none())
      .def_readwrite("mu_a", &mcrt::Layer::mu_a)
      .def_readwrite("mu_s", &mcrt::Layer::mu_s)
      .def_readwrite("g", &mcrt::Layer::g)
      .def_readwrite("n", &mcrt::Layer::n)
      .def_readwrite("thickness_mm", &mcrt::Layer::thickness_mm);

  py::class_<mcrt::LayerStack>(m, "LayerStack")
      .def(py::init([](std::vector<mcrt::Layer> layers, double ambient_n) {
             return mcrt::LayerStack{ambient_n, std::move(layers)};
           }),
           py::arg("layers"), py::arg("ambient_n") = 1.0)
      .def_readwrite("layers", &mcrt::LayerStack::layers)
      .def_readwrite("ambient_n", &mcrt::LayerStack::ambient_n);

  py::class_<mcrt::SimConfig>(m, "SimConfig")
      .def(py::init([](std::uint64_t photons, std::uint64_t seed, bool roulette) {
             mcrt::SimConfig c;
             c.photon_count = photons;
             c.seed = seed;
             c.enable_roulette = roulette;
             return c;
           }),
           py::arg("photon_count") = 100'000, py::arg("seed") = 1, py::arg("enable_roulette") = true)
      .def_readwrite("photon_count", &mcrt::SimConfig::photon_count)
      .def_readwrite("seed", &mcrt::SimConfig::seed)
      .def_readwrite("batch_size", &mcrt::SimConfig::batch_size)
      .def_readwrite("enable_roulette", &mcrt::SimConfig::enable_roulette);

  py::class_<mcrt::MCResult>(m, "MCResult")
      .def_readonly("r_specular", &mcrt::MCResult::r_specular)
      .def_readonly("r_diffuse", &mcrt::MCResult::r_diffuse)
      .def_readonly("transmittance", &mcrt::MCResult::transmittance)
      .def_readonly("absorbed", &mcrt::MCResult::absorbed)
      .def_readonly("r_diffuse_stderr", &mcrt::MCResult::r_diffuse_stderr)
      .def_readonly("transmittance_stderr", &mcrt::MCResult::transmittance_stderr)
      .def_readonly("photons", &mcrt::MCResult::photons)
      .def("total", &mcrt::MCResult::total)
      .def("__eq__", [](const mcrt::MCResult& a, const mcrt::MCResult& b) { return a == b; });

  m.def("simulate", &mcrt::simulate, py::arg("stack"), py::arg("config"), py::arg("workers") = 0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<mcrt::ForwardLut>(m, "Lut")
      .def_property_readonly("axes",
                             [](const mcrt::ForwardLut& l) {
                               std::vector<std::pair<std::string, std::vector<double>>> out;
                               for (const auto& a : l.axes()) out.emplace_back(a.name, a.nodes);
                               return out;
                             })
      .def_property_readonly(
          "values", [](const mcrt::ForwardLut& l) { return std::vector<double>(l.values().begin(), l.values().end()); })
      .def_property_readonly("provenance", [](const mcrt::ForwardLut& l) { return to_py(parse_json(l.provenance())); })
      .def(
          "reflectance",
          [](const mcrt::ForwardLut& l, double mu_a, double mu_s_prime) {
            double c[2];
            c[l.axis_index(mcrt::kAxisMuA)] = mu_a;
            c[l.axis_index(mcrt::kAxisMuSPrime)] = mu_s_prime;
            return mcrt::lut_reflectance(l, c);
          },
          py::arg("mu_a"), py::arg("mu_s_prime"))
      .def("save", [](const mcrt::ForwardLut& l, const std::filesystem::path& p) { mcrt::save_lut(l, p); })
      .def("to_bytes", [](const mcrt::ForwardLut& l) { return py::bytes(mcrt::serialize_lut(l)); })
      .def("__eq__", [](const mcrt::ForwardLut& a, const mcrt::ForwardLut& b) { return a == b; });

  m.def(
      "build_lut",
      [](const std::vector<std::pair<std::string, std::vector<double>>>& axes, const mcrt::SimConfig& cfg,
         unsigned workers) {
        std::vector<mcrt::LutAxis> ax;
        for (const auto& [name, nodes] : axes) ax.push_back({name, nodes});
        py::gil_scoped_release release;
        return mcrt::build_lut(mcrt::default_lut_template(), ax, cfg, workers);
      },
      py::arg("axes"), py::arg("config"), py::arg("workers") = 0,
      "LUT over the default semi-infinite template; axes are (name, nodes) pairs named mu_a and mu_s_prime.");

  m.def("load_lut", [](const std::filesystem::path& p) { return mcrt::load_lut(p); }, py::arg("path"));

  m.def(
      "predict_spectrum",
      [](const py::dict& params, const mcrt::ForwardLut& lut, const std::vector<double>& grid,
         const std::optional<std::filesystem::path>& table) {
        const auto p = to_cpp(params).get<inverse::SkinParameterVector>();
        const auto db = extinction_db(table);
        py::gil_scoped_release release;
        return inverse::predict_spectrum(p, lut, grid, db);
      },
      py::arg("params"), py::arg("lut"), py::arg("grid"), py::arg("extinction_table") = py::none());

  m.def(
      "fit",
      [](const spectral::Spectrum& measured, const py::dict& config, const mcrt::ForwardLut& lut,
         const std::optional<std::filesystem::path>& table, const std::vector<double>& stderrs) {
        const auto cfg = to_cpp(config).get<inverse::FitConfig>();
        const auto db = extinction_db(table);
        inverse::FitResult result;
        {
          py::gil_scoped_release release;
          result = inverse::fit(measured, cfg, lut, db, stderrs);
        }
        return to_py(Json(result));
      },
      py::arg("measured"), py::arg("config"), py::arg("lut"), py::arg("extinction_table") = py::none(),
      py::arg("stderr") = std::vector<double>{},
      "Projected Levenberg-Marquardt fit. `config` uses the FitConfig field names; returns the result as a dict.");
}
