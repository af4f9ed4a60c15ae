#include "afbm/experiment.hpp"
#include "afbm/transforms.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace afbm;

namespace {

ExperimentConfig config_from_json(const std::string& text) {
    return parse_config(nlohmann::json::parse(text));
}

py::dict ber_row_dict(const BerRow& r) {
    py::dict d;
    d["scheme"] = r.scheme;
    d["filter"] = r.filter;
    d["P"] = r.P;
    d["snr_db"] = r.snr_db;
    d["ebn0_db"] = r.ebn0_db;
    d["trials"] = r.trials;
    d["bit_errors"] = r.bit_errors;
    d["bits"] = r.bits;
    d["ber"] = r.ber;
    d["detector"] = r.detector;
    d["seed"] = r.seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "AFBM waveform, channel and detector core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::enum_<FilterKind>(m, "FilterKind")
        .value("Hermite", FilterKind::Hermite)
        .value("Phydyas", FilterKind::Phydyas)
        .value("Rectangular", FilterKind::Rectangular);

    py::class_<WaveformParams>(m, "WaveformParams")
        .def(py::init<>())
        .def_readwrite("L", &WaveformParams::L)
        .def_readwrite("K", &WaveformParams::K)
        .def_readwrite("P", &WaveformParams::P)
        .def_readwrite("N", &WaveformParams::N)
        .def_readwrite("O", &WaveformParams::O)
        .def_readwrite("c1", &WaveformParams::c1)
        .def_readwrite("c2", &WaveformParams::c2)
        .def_readwrite("filter", &WaveformParams::filter)
        .def_readwrite("symbol_energy", &WaveformParams::symbol_energy)
        .def("validate", &WaveformParams::validate)
        .def_property_readonly("frame_length", &WaveformParams::frame_length)
        .def_property_readonly("payload", &WaveformParams::payload);

    py::class_<AfbmModem>(m, "AfbmModem")
        .def(py::init<const WaveformParams&>())
        .def_property_readonly("params", &AfbmModem::params)
        .def_property_readonly("compensation", &AfbmModem::compensation)
        .def_property_readonly("noise_scale", &AfbmModem::noise_scale)
        .def("taps", [](const AfbmModem& self) { return self.filter().taps; })
        .def("modulate", &AfbmModem::modulate)
        .def("demodulate", &AfbmModem::demodulate)
        .def("transmit_matrix", &AfbmModem::transmit_matrix);

    m.def("default_c1", &default_c1, py::arg("P"), py::arg("max_doppler"), py::arg("guard_width"));
    m.def("dft_matrix", &dft_matrix, py::arg("n"));
    m.def("daft_matrix", &daft_matrix, py::arg("c1"), py::arg("c2"), py::arg("n"));
    m.def("prototype_filter",
          [](FilterKind kind, Index N, double O) { return prototype_filter(kind, N, O).taps; });

    m.def("qpsk_modulate", &qpsk_modulate, py::arg("bits"), py::arg("symbol_energy") = 1.0);
    m.def("hard_demap", &hard_demap);
    m.def(
        "gabp_detect",
        [](const ComplexMatrix& H, const ComplexVector& r, double noise_var, int max_iterations, double damping,
           double symbol_energy) {
            GaBPConfig cfg;
            cfg.max_iterations = max_iterations;
            cfg.damping = damping;
            cfg.symbol_energy = symbol_energy;
            return gabp_detect(H, r, noise_var, cfg).estimate;
        },
        py::arg("H"), py::arg("r"), py::arg("noise_var"), py::arg("max_iterations") = 20, py::arg("damping") = 0.5,
        py::arg("symbol_energy") = 1.0);
    m.def("lmmse_detect", &lmmse_detect, py::arg("H"), py::arg("r"), py::arg("noise_var"));
    m.def(
        "map_oracle",
        [](const ComplexMatrix& H, const ComplexVector& r, double symbol_energy) {
            return map_oracle(H, r, qpsk_alphabet(symbol_energy));
        },
        py::arg("H"), py::arg("r"), py::arg("symbol_energy") = 1.0);
    m.def("papr_db", &papr_db);

    m.def(
        "resolved_config",
        [](const std::string& text) { return to_json(config_from_json(text)).dump(); },
        py::arg("config_json") = "{}");
    m.def(
        "config_hash", [](const std::string& text) { return config_hash(config_from_json(text)); },
        py::arg("config_json") = "{}");
    m.def(
        "run_ber_sweep",
        [](const std::string& text) {
            const ExperimentConfig cfg = config_from_json(text);
            std::vector<BerRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_ber_sweep(cfg);
            }
            py::list out;
            for (const auto& r : rows) out.append(ber_row_dict(r));
            return out;
        },
        py::arg("config_json"));
    m.def(
        "ber_csv",
        [](const std::string& text) {
            const ExperimentConfig cfg = config_from_json(text);
            py::gil_scoped_release release;
            return ber_csv(cfg, run_ber_sweep(cfg));
        },
        py::arg("config_json"));
    m.def(
        "run_loopback",
        [](const std::string& text, Index frames) {
            const ExperimentConfig cfg = config_from_json(text);
            return loopback_json(cfg, run_loopback(cfg, frames)).dump();
        },
        py::arg("config_json"), py::arg("frames") = 10);
}
