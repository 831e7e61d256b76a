// Python bindings for the main pipeline operations: frames, matching,
// inpainting, OCR, interventions, corpus generation, codecs and the budget
// model.  Kept intentionally thin — all behavior lives in the C++ core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gtrm/cli.hpp"
#include "gtrm/config.hpp"
#include "gtrm/corpus.hpp"
#include "gtrm/hooks.hpp"
#include "gtrm/image_io.hpp"
#include "gtrm/imaging.hpp"
#include "gtrm/interventions.hpp"
#include "gtrm/net.hpp"

#include <sstream>

namespace py = pybind11;
using namespace gtrm;

namespace {

Frame frame_from_array(py::array_t<uint8_t, py::array::c_style | py::array::forcecast> a,
                       uint64_t id, uint64_t timestamp_us) {
    if (a.ndim() == 2) {
        Frame f;
        f.id = id;
        f.timestamp_us = timestamp_us;
        f.width = uint32_t(a.shape(1));
        f.height = uint32_t(a.shape(0));
        f.format = PixelFormat::GRAY8;
        f.data.assign(a.data(), a.data() + a.size());
        if (f.data.size() != f.expected_bytes()) throw DimensionError("bad array shape");
        return f;
    }
    if (a.ndim() == 3 && a.shape(2) == 4) {
        Frame f;
        f.id = id;
        f.timestamp_us = timestamp_us;
        f.width = uint32_t(a.shape(1));
        f.height = uint32_t(a.shape(0));
        f.format = PixelFormat::RGBA8;
        f.data.assign(a.data(), a.data() + a.size());
        return f;
    }
    throw DimensionError("expected an HxW gray or HxWx4 RGBA uint8 array");
}

py::array frame_to_array(const Frame& f) {
    if (f.format == PixelFormat::GRAY8) {
        py::array_t<uint8_t> a({py::ssize_t(f.height), py::ssize_t(f.width)});
        std::memcpy(a.mutable_data(), f.data.data(), f.data.size());
        return a;
    }
    py::array_t<uint8_t> a({py::ssize_t(f.height), py::ssize_t(f.width), py::ssize_t(4)});
    std::memcpy(a.mutable_data(), f.data.data(), f.data.size());
    return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "screen-frame intervention pipeline core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<BoundsError>(m, "BoundsError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);

    py::class_<Region>(m, "Region")
        .def(py::init([](uint32_t x, uint32_t y, uint32_t w, uint32_t h) {
                 return Region{x, y, w, h};
             }),
             py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"))
        .def_readwrite("x", &Region::x)
        .def_readwrite("y", &Region::y)
        .def_readwrite("w", &Region::w)
        .def_readwrite("h", &Region::h)
        .def("__eq__", [](const Region& a, const Region& b) { return a == b; })
        .def("__repr__", [](const Region& r) {
            std::ostringstream s;
            s << "Region(" << r.x << ", " << r.y << ", " << r.w << ", " << r.h << ")";
            return s.str();
        });

    py::class_<Frame>(m, "Frame")
        .def_readonly("id", &Frame::id)
        .def_readonly("timestamp_us", &Frame::timestamp_us)
        .def_readonly("width", &Frame::width)
        .def_readonly("height", &Frame::height)
        .def("to_array", &frame_to_array)
        .def("__repr__", [](const Frame& f) {
            std::ostringstream s;
            s << "Frame(id=" << f.id << ", " << f.width << "x" << f.height << ")";
            return s.str();
        });

    py::class_<Detection>(m, "Detection")
        .def_readonly("region", &Detection::region)
        .def_readonly("score", &Detection::score)
        .def_readonly("scale", &Detection::scale)
        .def_readonly("label", &Detection::label);

    py::class_<OverlayOp>(m, "OverlayOp")
        .def_property_readonly("kind", [](const OverlayOp& op) { return int(op.kind); })
        .def_readonly("z", &OverlayOp::z)
        .def_readonly("region", &OverlayOp::region)
        .def_property_readonly("color",
                               [](const OverlayOp& op) {
                                   return py::make_tuple(op.color.r, op.color.g, op.color.b,
                                                         op.color.a);
                               })
        .def_readonly("alpha", &OverlayOp::alpha)
        .def_readonly("text", &OverlayOp::text)
        .def_property_readonly("patch", [](const OverlayOp& op) {
            return py::bytes(reinterpret_cast<const char*>(op.patch.data()),
                             op.patch.size());
        });

    m.def("make_frame", &frame_from_array, py::arg("array"), py::arg("id") = 0,
          py::arg("timestamp_us") = 0, "Frame from an HxW gray or HxWx4 RGBA uint8 array");
    m.def("read_image", &io::read_image, py::arg("path"));
    m.def("write_pam", &io::write_pam, py::arg("path"), py::arg("frame"));

    // matching
    m.def(
        "match_multiscale",
        [](const Frame& image, const std::vector<Frame>& templates, const std::string& mode,
           std::vector<std::string> labels) {
            std::vector<imaging::GrayImage> tmpls;
            for (const Frame& t : templates) tmpls.push_back(imaging::to_gray(t));
            const auto cfg = imaging::default_match_config(
                mode == "contour" ? imaging::MatchMode::Contour : imaging::MatchMode::Color);
            return imaging::match_multiscale(imaging::to_gray(image), tmpls, cfg, labels);
        },
        py::arg("image"), py::arg("templates"), py::arg("mode") = "color",
        py::arg("labels") = std::vector<std::string>{},
        "Multi-scale template matching at the default scale ladder");

    m.def(
        "detect_scroll",
        [](const Frame& prev, const Frame& cur) { return imaging::detect_scroll(prev, cur); },
        py::arg("prev"), py::arg("cur"),
        "Vertical displacement between consecutive frames, or None");

    // inpainting
    m.def(
        "inpaint_majority",
        [](const Frame& f, const Region& r) { return imaging::inpaint_majority(f, r); },
        py::arg("frame"), py::arg("region"));
    m.def(
        "inpaint_fmm",
        [](const Frame& f, const Region& r, int radius) {
            return imaging::inpaint_fmm(f, r, radius);
        },
        py::arg("frame"), py::arg("region"), py::arg("radius") = 5);

    // OCR
    m.def(
        "detect_text_regions",
        [](const Frame& f) { return hooks::detect_text_regions(imaging::to_gray(f)); },
        py::arg("frame"));
    m.def(
        "recognize_text",
        [](const Frame& f, const Region& line) {
            const auto box = hooks::recognize_text(imaging::to_gray(f), line);
            return py::make_tuple(box.text, box.confidence);
        },
        py::arg("frame"), py::arg("line"), "Returns (text, confidence) for one line region");

    // budget
    m.def(
        "latency_budget",
        [](double bandwidth_bps, double image_bits, std::vector<double> per_model_ms,
           double target_fps) {
            net::BudgetInput in;
            in.bandwidth_bps = bandwidth_bps;
            in.image_bits = image_bits;
            in.per_model_ms = std::move(per_model_ms);
            in.target_fps = target_fps;
            const auto rep = net::latency_budget(in);
            py::dict d;
            d["one_way_ms"] = rep.one_way_ms;
            d["total_ms"] = rep.total_ms;
            d["max_fps"] = rep.max_fps;
            d["max_models_at_target"] = rep.max_models_at_target;
            return d;
        },
        py::arg("bandwidth_bps"), py::arg("image_bits"), py::arg("per_model_ms"),
        py::arg("target_fps") = 5.0);

    // codecs
    m.def(
        "encode_frame",
        [](const Frame& f) {
            const auto v = net::encode_frame(f);
            return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
        },
        py::arg("frame"));
    m.def("decode_frame", [](py::bytes b) {
        const std::string_view s = b;
        return net::decode_frame(
            std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
    });

    // corpus
    m.def(
        "generate_screen",
        [](const std::string& manifest_block) {
            const auto man = corpus::parse_manifest(manifest_block);
            if (man.screens.size() != 1)
                throw ConfigError("expected exactly one screen block");
            const auto screen = corpus::generate_screen(man.screens[0]);
            py::list truth;
            for (const auto& e : screen.truth.entries) {
                py::dict d;
                d["kind"] = corpus::to_string(e.kind);
                d["rect"] = e.rect;
                d["transcript"] = e.transcript;
                d["protected"] = e.protected_content;
                d["scale"] = e.scale;
                truth.append(d);
            }
            return py::make_tuple(screen.frame, truth);
        },
        py::arg("manifest_block"),
        "Render one screen from a single-screen manifest snippet; returns (frame, truth)");
    m.def(
        "generate_scroll_sequence",
        [](uint64_t seed, uint32_t width, uint32_t height, std::vector<int32_t> shifts) {
            corpus::SequenceSpec spec;
            spec.seed = seed;
            spec.width = width;
            spec.height = height;
            return corpus::generate_scroll_sequence(spec, shifts);
        },
        py::arg("seed"), py::arg("width"), py::arg("height"), py::arg("shifts"));

    // interventions: run a config-built pipeline over one frame
    m.def(
        "run_pipeline_file",
        [](const Frame& frame, const std::filesystem::path& config_file) {
            const auto cfg = config::load_config(config_file);
            const auto built = config::build_pipeline(
                cfg, std::filesystem::absolute(config_file).parent_path());
            const auto result = hooks::run_pipeline(frame, built.bindings);
            return composite(frame, result.plan);
        },
        py::arg("frame"), py::arg("config_file"),
        "Composite the overlay plan a config's pipeline produces for one frame");

    m.def(
        "lexicon_score",
        [](const std::filesystem::path& lexicon, const std::string& text) {
            return interventions::lexicon_score(interventions::load_lexicon(lexicon), text);
        },
        py::arg("lexicon"), py::arg("text"));

    m.def("average_hash", [](const Frame& f) {
        return imaging::average_hash(imaging::to_gray(f));
    });
    m.def("hamming_distance", &imaging::hamming_distance, py::arg("a"), py::arg("b"));
}
