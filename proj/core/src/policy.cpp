// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/policy.hpp"

#include "splatover/error.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace splatover {

PolicyInput
make_policy_input(const Image8 &rgb, const Image8 &object_mask, const Image8 &hand_mask) {
    if (rgb.channels != 3 || object_mask.channels != 1 || hand_mask.channels != 1 ||
        object_mask.width != rgb.width || object_mask.height != rgb.height || hand_mask.width != rgb.width ||
        hand_mask.height != rgb.height) {
        throw Error(ErrorCode::ShapeMismatch, "policy input needs RGB plus two single-channel masks of equal size");
    }
    PolicyInput in;
    in.width = rgb.width;
    in.height = rgb.height;
    const std::size_t hw = static_cast<std::size_t>(rgb.width) * static_cast<std::size_t>(rgb.height);
    in.data.resize(5 * hw);
    for (std::size_t i = 0; i < hw; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            in.data[c * hw + i] = static_cast<float>(rgb.data[3 * i + c]) / 255.0f;
        }
        in.data[3 * hw + i] = object_mask.data[i] ? 1.0f : 0.0f;
        in.data[4 * hw + i] = hand_mask.data[i] ? 1.0f : 0.0f;
    }
    return in;
}

void
TrainConfig::validate() const {
    if (epochs < 0 || batch_size < 1 || !(learning_rate > 0.0) || momentum < 0.0 || momentum >= 1.0 ||
        grad_clip < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
    }
}

SampleSet
make_samples(const Dataset &dataset) {
    SampleSet set;
    set.inputs.reserve(dataset.step_count());
    for (const auto &ep : dataset.episodes) {
        for (const auto &step : ep.steps) {
            set.inputs.push_back(make_policy_input(step.rgb, step.object_mask, step.hand_mask));
        }
    }
    std::size_t k = 0;
    for (const auto &ep : dataset.episodes) {
        for (const auto &step : ep.steps) {
            set.samples.push_back({&set.inputs[k++], step.action, step.grasp_label});
        }
    }
    return set;
}

void
write_training_log(const TrainingLog &log, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    out << "epoch\ttotal\tL_t\tL_r\tL_g\n";
    char buf[160];
    for (const auto &e : log) {
        std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\t%.9g\n", e.epoch, e.mean.total, e.mean.translation,
                      e.mean.rotation, e.mean.grasp);
        out << buf;
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

// Parameter file, all little-endian:
//   "SPLPOLCY" | u32 schema | u32 x 11 dims | f64 t_max | f64 r_max | u64 count | f32 x count
namespace {

constexpr std::array<char, 8> kMagic{'S', 'P', 'L', 'P', 'O', 'L', 'C', 'Y'};

template <typename U>
void
put(std::string &buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

class Reader {
  public:
    Reader(const std::string &bytes, std::string name) : mBytes(bytes), mName(std::move(name)) {}

    template <typename U>
    U
    get(const char *what) {
        if (mPos + sizeof(U) > mBytes.size()) {
            fail(std::string("truncated ") + what);
        }
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(mBytes[mPos + i])) << (8 * i);
        }
        mPos += sizeof(U);
        return v;
    }

    [[noreturn]] void
    fail(const std::string &what) const {
        throw Error(ErrorCode::IoError, mName + ": " + what + " at byte " + std::to_string(mPos));
    }

    [[nodiscard]] std::size_t pos() const { return mPos; }
    [[nodiscard]] std::size_t remaining() const { return mBytes.size() - mPos; }

  private:
    const std::string &mBytes;
    std::string mName;
    std::size_t mPos = 0;
};

std::array<int, 11>
dims_of(const PolicyArchitecture &a) {
    return {a.height, a.width, a.in_channels, a.coord_channels, a.c1, a.c2, a.c3, a.k1, a.k2, a.k3, a.hidden};
}

} // namespace

void
save_params(const PolicyParams &params, const std::filesystem::path &path) {
    if (params.values.size() != params.arch.param_count()) {
        throw Error(ErrorCode::ArchitectureMismatch, "parameter vector does not match the architecture");
    }
    std::string buf(kMagic.begin(), kMagic.end());
    put<std::uint32_t>(buf, kParamsSchemaVersion);
    for (int d : dims_of(params.arch)) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    }
    put<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(params.arch.t_max));
    put<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(params.arch.r_max));
    put<std::uint64_t>(buf, params.values.size());
    for (float v : params.values) {
        put<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(v));
    }
    std::ofstream out(path, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

PolicyParams
load_params(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    Reader r(bytes, path.string());
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        r.fail("bad magic");
    }
    for (std::size_t i = 0; i < kMagic.size(); ++i) {
        r.get<std::uint8_t>("magic");
    }
    if (const auto version = r.get<std::uint32_t>("schema version"); version != kParamsSchemaVersion) {
        r.fail("unsupported schema version " + std::to_string(version));
    }
    std::array<int, 11> d{};
    for (int &v : d) {
        const auto u = r.get<std::uint32_t>("layer dims");
        if (u > 1u << 20) {
            r.fail("implausible layer dimension " + std::to_string(u));
        }
        v = static_cast<int>(u);
    }
    PolicyParams params;
    PolicyArchitecture &a = params.arch;
    a.height = d[0];
    a.width = d[1];
    a.in_channels = d[2];
    a.coord_channels = d[3];
    a.c1 = d[4];
    a.c2 = d[5];
    a.c3 = d[6];
    a.k1 = d[7];
    a.k2 = d[8];
    a.k3 = d[9];
    a.hidden = d[10];
    a.t_max = std::bit_cast<double>(r.get<std::uint64_t>("t_max"));
    a.r_max = std::bit_cast<double>(r.get<std::uint64_t>("r_max"));
    const auto count = r.get<std::uint64_t>("parameter count");
    a.validate();
    if (count != a.param_count()) {
        throw Error(ErrorCode::ArchitectureMismatch,
                    path.string() + ": " + std::to_string(count) + " values for an architecture of " +
                        std::to_string(a.param_count()));
    }
    if (r.remaining() != count * 4) {
        r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(count * 4));
    }
    params.values.resize(count);
    for (float &v : params.values) {
        v = std::bit_cast<float>(r.get<std::uint32_t>("weights"));
    }
    return params;
}

PolicyParams
load_params(const std::filesystem::path &path, const PolicyArchitecture &expected) {
    PolicyParams params = load_params(path);
    if (!(params.arch == expected)) {
        throw Error(ErrorCode::ArchitectureMismatch, path.string() + ": stored architecture differs from expected");
    }
    return params;
}

} // namespace splatover
