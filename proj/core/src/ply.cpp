// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/error.hpp"
#include "splatover/scene.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace splatover {

namespace {

constexpr double kShC0 = 0.28209479177387814;

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct Property {
    std::string name;
    ScalarType type;
    std::size_t offset;
};

std::size_t
scalar_size(ScalarType t) {
    switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
    }
    return 0;
}

std::optional<ScalarType>
parse_scalar_type(const std::string &s) {
    static const std::map<std::string, ScalarType> kTypes = {
        {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},       {"uchar", ScalarType::UInt8},
        {"uint8", ScalarType::UInt8},   {"short", ScalarType::Int16},     {"int16", ScalarType::Int16},
        {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},   {"int", ScalarType::Int32},
        {"int32", ScalarType::Int32},   {"uint", ScalarType::UInt32},     {"uint32", ScalarType::UInt32},
        {"float", ScalarType::Float32}, {"float32", ScalarType::Float32}, {"double", ScalarType::Float64},
        {"float64", ScalarType::Float64}};
    const auto it = kTypes.find(s);
    if (it == kTypes.end()) {
        return std::nullopt;
    }
    return it->second;
}

template <typename T>
T
read_le(const unsigned char *p) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double
read_scalar(const unsigned char *p, ScalarType t) {
    switch (t) {
    case ScalarType::Int8: return read_le<std::int8_t>(p);
    case ScalarType::UInt8: return read_le<std::uint8_t>(p);
    case ScalarType::Int16: return read_le<std::int16_t>(p);
    case ScalarType::UInt16: return read_le<std::uint16_t>(p);
    case ScalarType::Int32: return read_le<std::int32_t>(p);
    case ScalarType::UInt32: return read_le<std::uint32_t>(p);
    case ScalarType::Float32: return read_le<float>(p);
    case ScalarType::Float64: return read_le<double>(p);
    }
    return 0.0;
}

[[noreturn]] void
malformed(const std::filesystem::path &path, const std::string &what) {
    throw Error(ErrorCode::MalformedSplatFile, path.string() + ": " + what);
}

double
sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

} // namespace

GaussianScene
load_scene(const std::filesystem::path &splat_path, const std::filesystem::path &labels_path) {
    std::ifstream in(splat_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, splat_path.string());
    }

    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        malformed(splat_path, "missing 'ply' magic");
    }

    GaussianScene scene;
    std::vector<Property> props;
    std::size_t vertex_count = 0;
    std::size_t stride = 0;
    bool in_vertex = false;
    bool seen_vertex = false;
    bool binary_le = false;
    std::optional<bool> opacity_is_logit;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "end_header") {
            break;
        }
        if (keyword == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (keyword == "comment") {
            std::string key;
            ls >> key;
            if (key == "opacity") {
                std::string mode;
                ls >> mode;
                if (mode == "logit") {
                    opacity_is_logit = true;
                } else if (mode == "linear") {
                    opacity_is_logit = false;
                }
            } else if (key == "up_axis") {
                Vec3 up;
                if (ls >> up.x() >> up.y() >> up.z()) {
                    scene.up_axis = up.normalized();
                }
            } else if (key == "table_height") {
                double h;
                if (ls >> h) {
                    scene.table_height = h;
                }
            }
        } else if (keyword == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (seen_vertex) {
                // Elements after the vertex block are ignored; data for them trails the vertices.
                in_vertex = false;
                continue;
            }
            in_vertex = name == "vertex";
            if (!in_vertex) {
                malformed(splat_path, "element '" + name + "' precedes vertex data");
            }
            seen_vertex = true;
            vertex_count = count;
        } else if (keyword == "property") {
            if (!in_vertex) {
                continue;
            }
            std::string type_name, name;
            ls >> type_name;
            if (type_name == "list") {
                malformed(splat_path, "list properties are not supported on vertices");
            }
            ls >> name;
            const auto type = parse_scalar_type(type_name);
            if (!type) {
                malformed(splat_path, "unknown property type '" + type_name + "'");
            }
            props.push_back({name, *type, stride});
            stride += scalar_size(*type);
        }
    }
    if (!binary_le) {
        malformed(splat_path, "only binary_little_endian PLY is supported");
    }
    if (!seen_vertex) {
        malformed(splat_path, "no vertex element");
    }

    auto find = [&](const std::string &name) -> const Property & {
        const auto it = std::find_if(props.begin(), props.end(), [&](const Property &p) { return p.name == name; });
        if (it == props.end()) {
            malformed(splat_path, "missing required property '" + name + "'");
        }
        return *it;
    };
    const std::array<const Property *, 3> pos = {&find("x"), &find("y"), &find("z")};
    const std::array<const Property *, 3> scale = {&find("scale_0"), &find("scale_1"), &find("scale_2")};
    const std::array<const Property *, 4> rot = {&find("rot_0"), &find("rot_1"), &find("rot_2"), &find("rot_3")};
    const std::array<const Property *, 3> dc = {&find("f_dc_0"), &find("f_dc_1"), &find("f_dc_2")};
    const Property &opacity = find("opacity");

    std::vector<unsigned char> buffer(vertex_count * stride);
    in.read(reinterpret_cast<char *>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
        malformed(splat_path, "truncated vertex data");
    }

    std::vector<double> raw_opacity(vertex_count);
    scene.gaussians.resize(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        const unsigned char *row = buffer.data() + i * stride;
        Gaussian &g = scene.gaussians[i];
        for (int k = 0; k < 3; ++k) {
            g.mean[k] = read_scalar(row + pos[k]->offset, pos[k]->type);
            g.log_scale[k] = read_scalar(row + scale[k]->offset, scale[k]->type);
            g.color[k] = std::clamp(read_scalar(row + dc[k]->offset, dc[k]->type) * kShC0 + 0.5, 0.0, 1.0);
        }
        const Quat q{read_scalar(row + rot[0]->offset, rot[0]->type), read_scalar(row + rot[1]->offset, rot[1]->type),
                     read_scalar(row + rot[2]->offset, rot[2]->type), read_scalar(row + rot[3]->offset, rot[3]->type)};
        if (!(q.norm() > 0.0)) {
            malformed(splat_path, "zero rotation quaternion at vertex " + std::to_string(i));
        }
        g.rotation = q.normalized();
        raw_opacity[i] = read_scalar(row + opacity.offset, opacity.type);
    }
    const bool logit = opacity_is_logit.value_or(
        std::any_of(raw_opacity.begin(), raw_opacity.end(), [](double v) { return v < 0.0 || v > 1.0; }));
    for (std::size_t i = 0; i < vertex_count; ++i) {
        scene.gaussians[i].opacity = logit ? sigmoid(raw_opacity[i]) : raw_opacity[i];
    }

    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) {
        throw Error(ErrorCode::FileNotFound, labels_path.string());
    }
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(labels)), std::istreambuf_iterator<char>());
    if (bytes.size() != vertex_count) {
        throw Error(ErrorCode::LabelLengthMismatch, labels_path.string() + " has " + std::to_string(bytes.size()) +
                                                        " labels for " + std::to_string(vertex_count) + " Gaussians");
    }
    for (std::size_t i = 0; i < vertex_count; ++i) {
        if (bytes[i] > 2) {
            throw Error(ErrorCode::MalformedSplatFile,
                        labels_path.string() + ": invalid label byte " + std::to_string(bytes[i]) + " at index " +
                            std::to_string(i));
        }
        scene.gaussians[i].label = static_cast<Label>(bytes[i]);
    }
    return scene;
}

void
save_scene(const GaussianScene &scene, const std::filesystem::path &splat_path,
           const std::filesystem::path &labels_path) {
    std::ofstream out(splat_path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open " + splat_path.string() + " for writing");
    }
    std::ostringstream header;
    header.precision(17);
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "comment opacity logit\n";
    header << "comment up_axis " << scene.up_axis.x() << ' ' << scene.up_axis.y() << ' ' << scene.up_axis.z() << '\n';
    if (scene.table_height) {
        header << "comment table_height " << *scene.table_height << '\n';
    }
    header << "element vertex " << scene.gaussians.size() << '\n';
    static constexpr std::array<const char *, 17> kNames = {
        "x",       "y",       "z",       "nx",      "ny",    "nz",    "f_dc_0", "f_dc_1", "f_dc_2",
        "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",  "rot_3"};
    for (const char *name : kNames) {
        header << "property float " << name << '\n';
    }
    header << "end_header\n";
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));

    std::vector<float> row(kNames.size());
    for (const Gaussian &g : scene.gaussians) {
        // Keep the logit finite for fully opaque/transparent splats.
        const double o = std::clamp(g.opacity, 1e-7, 1.0 - 1e-7);
        const double values[17] = {g.mean.x(),
                                   g.mean.y(),
                                   g.mean.z(),
                                   0.0,
                                   0.0,
                                   0.0,
                                   (g.color.x() - 0.5) / kShC0,
                                   (g.color.y() - 0.5) / kShC0,
                                   (g.color.z() - 0.5) / kShC0,
                                   std::log(o / (1.0 - o)),
                                   g.log_scale.x(),
                                   g.log_scale.y(),
                                   g.log_scale.z(),
                                   g.rotation.w,
                                   g.rotation.x,
                                   g.rotation.y,
                                   g.rotation.z};
        for (std::size_t k = 0; k < row.size(); ++k) {
            row[k] = static_cast<float>(values[k]);
        }
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + splat_path.string());
    }

    std::ofstream labels(labels_path, std::ios::binary);
    if (!labels) {
        throw Error(ErrorCode::IoError, "cannot open " + labels_path.string() + " for writing");
    }
    for (const Gaussian &g : scene.gaussians) {
        labels.put(static_cast<char>(g.label));
    }
    if (!labels) {
        throw Error(ErrorCode::IoError, "failed writing " + labels_path.string());
    }
}

} // namespace splatover
