#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lagdec/network.hpp"
#include "lagdec/prebounds.hpp"

namespace lagdec {

using Json = nlohmann::json;

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n' ? 1 : 0;
    return line;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
}

inline Vec flat_numbers(const Json& j, std::vector<std::size_t>& shape, std::size_t depth, const std::string& what) {
    if (j.is_number()) {
        if (depth != shape.size()) throw ShapeError(what + ": ragged array");
        return {j.get<double>()};
    }
    if (!j.is_array()) throw ShapeError(what + ": expected a numeric array");
    if (depth == shape.size()) shape.push_back(j.size());
    if (shape[depth] != j.size()) throw ShapeError(what + ": ragged array");
    Vec out;
    for (const Json& e : j) {
        Vec part = flat_numbers(e, shape, depth + 1, what);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

inline Tensor tensor_from_json(const Json& j, std::size_t rank, const std::string& what) {
    std::vector<std::size_t> shape;
    Vec data = flat_numbers(j, shape, 0, what);
    if (shape.size() != rank) {
        throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got " + shape_string(shape));
    }
    return Tensor(std::move(shape), std::move(data));
}

inline Json tensor_to_json(const Tensor& t, std::size_t dim = 0, std::size_t offset = 0) {
    if (dim == t.rank()) return t[offset];
    Json arr = Json::array();
    std::size_t stride = 1;
    for (std::size_t d = dim + 1; d < t.rank(); ++d) stride *= t.dim(d);
    for (std::size_t i = 0; i < t.dim(dim); ++i) arr.push_back(tensor_to_json(t, dim + 1, offset + i * stride));
    return arr;
}

inline std::vector<std::size_t> shape_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw ShapeError(what + ": input_shape must be [C,H,W]");
    return j.get<std::vector<std::size_t>>();
}

}  // namespace detail

/// Builds a network from the JSON model document.
inline Network model_from_json(const Json& doc) {
    if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
        throw ShapeError("model: expected an object with a 'layers' array");
    }
    std::vector<AffineLayer> layers;
    std::vector<Activation> acts;
    std::vector<std::size_t> shape;  // [C,H,W] flowing into the next conv layer, if known
    if (doc.contains("input_shape")) shape = detail::shape_from_json(doc["input_shape"], "model");
    bool expect_affine = true;
    std::size_t index = 0;
    for (const Json& layer : doc["layers"]) {
        const std::string name = "layer " + std::to_string(index++);
        const std::string type = layer.value("type", "");
        if (type == "relu" || type == "sigmoid") {
            if (expect_affine) throw ShapeError(name + ": activation must follow an affine layer");
            acts.push_back(type == "relu" ? Activation::relu : Activation::sigmoid);
            expect_affine = true;
            continue;
        }
        if (!expect_affine) throw ShapeError(name + ": two affine layers need an activation between them");
        try {
            if (type == "dense") {
                layers.push_back(AffineLayer::dense(detail::tensor_from_json(layer.at("weight"), 2, "weight"),
                                                    detail::tensor_from_json(layer.at("bias"), 1, "bias")));
                shape.clear();
            } else if (type == "conv2d") {
                if (layer.contains("input_shape")) shape = detail::shape_from_json(layer["input_shape"], name);
                if (shape.empty()) throw ShapeError("conv2d needs an input_shape");
                layers.push_back(AffineLayer::conv2d(detail::tensor_from_json(layer.at("weight"), 4, "weight"),
                                                     detail::tensor_from_json(layer.at("bias"), 1, "bias"),
                                                     layer.value("stride", std::size_t{1}),
                                                     layer.value("padding", std::size_t{0}), shape));
                shape = layers.back().out_shape();
            } else {
                throw ShapeError("unknown layer type '" + type + "'");
            }
        } catch (const ShapeError& e) {
            throw ShapeError(name + ": " + e.what());
        } catch (const Json::exception& e) {
            throw ShapeError(name + ": " + e.what());
        }
        expect_affine = false;
    }
    if (layers.empty()) throw ShapeError("model: no affine layers");
    if (expect_affine) throw ShapeError("model: must end with an affine layer");
    return Network(std::move(layers), std::move(acts));
}

inline Json model_to_json(const Network& net) {
    Json doc;
    Json layers = Json::array();
    for (std::size_t i = 0; i < net.num_affine(); ++i) {
        const AffineLayer& l = net.layer(i);
        Json j;
        if (l.kind() == LayerKind::dense) {
            j["type"] = "dense";
        } else {
            j["type"] = "conv2d";
            j["stride"] = l.geometry().stride;
            j["padding"] = l.geometry().padding;
            j["input_shape"] = l.in_shape();
        }
        j["weight"] = detail::tensor_to_json(l.weight());
        j["bias"] = detail::tensor_to_json(l.bias());
        layers.push_back(std::move(j));
        if (i < net.num_hidden()) layers.push_back(Json{{"type", to_string(net.activation(i))}});
    }
    doc["layers"] = std::move(layers);
    return doc;
}

inline Network load_model(const std::string& path) { return model_from_json(detail::parse_json(detail::read_file(path))); }

inline void save_model(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << model_to_json(net).dump(1) << '\n';
}

/// Domain, objective and threshold of one verification / bounding problem.
struct PropertySpec {
    InputDomain domain;
    Vec objective;
    double threshold = 0.0;
};

inline PropertySpec property_from_json(const Json& doc) {
    try {
        const Json& d = doc.at("domain");
        const std::string type = d.at("type").get<std::string>();
        Vec c = doc.at("objective").get<Vec>();
        const double t = doc.value("threshold", 0.0);
        if (type == "box") return {Box{d.at("l").get<Vec>(), d.at("u").get<Vec>()}, std::move(c), t};
        if (type == "l2") return {L2Ball{d.at("center").get<Vec>(), d.at("radius").get<double>()}, std::move(c), t};
        throw std::invalid_argument("unknown domain type '" + type + "'");
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("property: ") + e.what());
    }
}

inline Json property_to_json(const PropertySpec& p) {
    Json doc;
    if (p.domain.is_box()) {
        doc["domain"] = {{"type", "box"}, {"l", p.domain.box().lower}, {"u", p.domain.box().upper}};
    } else {
        doc["domain"] = {{"type", "l2"}, {"center", p.domain.ball().center}, {"radius", p.domain.ball().radius}};
    }
    doc["objective"] = p.objective;
    doc["threshold"] = p.threshold;
    return doc;
}

inline PropertySpec load_property(const std::string& path) {
    return property_from_json(detail::parse_json(detail::read_file(path)));
}

inline void save_property(const PropertySpec& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << property_to_json(p).dump(1) << '\n';
}

}  // namespace lagdec
