#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rerank/errors.hpp"
#include "rerank/rng.hpp"

namespace rerank {

enum class Role : std::uint8_t { query, gallery };

// n x d row-major feature matrix with per-row id/label/camera/role metadata.
// Immutable by convention once built; label -1 marks distractor rows,
// camera -1 means "no camera".
struct FeatureSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> features;          // n * d, row-major
    std::vector<std::string> ids;         // n, unique
    std::vector<std::int32_t> labels;     // n
    std::vector<std::int32_t> cameras;    // n
    std::vector<Role> roles;              // n

    const float* row(std::size_t i) const { return features.data() + i * d; }
    float* row(std::size_t i) { return features.data() + i * d; }

    void validate() const {
        if (n < 1 || d < 1) throw DimensionMismatch("FeatureSet: n and d must be >= 1");
        if (features.size() != n * d)
            throw DimensionMismatch("FeatureSet: feature buffer size mismatch");
        if (ids.size() != n || labels.size() != n || cameras.size() != n || roles.size() != n)
            throw LabelCountMismatch("FeatureSet: metadata length != n");
        for (float v : features)
            if (!std::isfinite(v)) throw NonFiniteFeature("FeatureSet: NaN/Inf entry");
        std::unordered_set<std::string> seen;
        for (const auto& id : ids)
            if (!seen.insert(id).second)
                throw Error("FeatureSet: duplicate id '" + id + "'");
    }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

inline bool is_little_endian() {
    const std::uint32_t x = 1;
    unsigned char c;
    std::memcpy(&c, &x, 1);
    return c == 1;
}

inline std::string sidecar_path(const std::string& path) {
    return path + ".labels.csv";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

// Binary layout: "FEAT", u32 version=1, u64 n, u64 d, then n*d f32 row-major,
// all little-endian. Sidecar CSV `<path>.labels.csv`: id,label,camera,role.
inline void write_feature_set(const FeatureSet& fs, const std::string& path) {
    fs.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoFailure("cannot open for write: " + path);
    os.write("FEAT", 4);
    detail::put_u32(os, 1u);
    detail::put_u64(os, fs.n);
    detail::put_u64(os, fs.d);
    if (detail::is_little_endian()) {
        os.write(reinterpret_cast<const char*>(fs.features.data()),
                 static_cast<std::streamsize>(fs.features.size() * sizeof(float)));
    } else {
        for (float v : fs.features) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            detail::put_u32(os, bits);
        }
    }
    if (!os) throw IoFailure("write failed: " + path);
    os.close();

    std::ofstream cs(detail::sidecar_path(path), std::ios::trunc);
    if (!cs) throw IoFailure("cannot open for write: " + detail::sidecar_path(path));
    cs << "id,label,camera,role\n";
    for (std::size_t i = 0; i < fs.n; ++i) {
        cs << fs.ids[i] << ',' << fs.labels[i] << ',' << fs.cameras[i] << ','
           << (fs.roles[i] == Role::query ? "query" : "gallery") << '\n';
    }
    if (!cs) throw IoFailure("write failed: " + detail::sidecar_path(path));
}

inline FeatureSet load_feature_set(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoFailure("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw TruncatedFile(path + ": shorter than header");
    if (std::memcmp(magic, "FEAT", 4) != 0)
        throw MagicMismatch(path + ": bad magic bytes at offset 0");
    std::uint32_t version;
    std::uint64_t n, d;
    if (!detail::get_u32(is, version) || !detail::get_u64(is, n) || !detail::get_u64(is, d))
        throw TruncatedFile(path + ": truncated header");
    if (version != 1) throw MagicMismatch(path + ": unsupported format version");
    if (n == 0 || d == 0) throw DimensionMismatch(path + ": n or d is zero");

    FeatureSet fs;
    fs.n = n;
    fs.d = d;
    fs.features.resize(n * d);
    if (detail::is_little_endian()) {
        if (!is.read(reinterpret_cast<char*>(fs.features.data()),
                     static_cast<std::streamsize>(n * d * sizeof(float))))
            throw TruncatedFile(path + ": payload shorter than n*d*4 bytes (offset " +
                                std::to_string(24 + is.gcount()) + ")");
    } else {
        for (std::size_t i = 0; i < n * d; ++i) {
            std::uint32_t bits;
            if (!detail::get_u32(is, bits))
                throw TruncatedFile(path + ": payload shorter than n*d*4 bytes");
            std::memcpy(&fs.features[i], &bits, 4);
        }
    }
    for (std::size_t i = 0; i < n * d; ++i)
        if (!std::isfinite(fs.features[i]))
            throw NonFiniteFeature(path + ": non-finite value at flat index " + std::to_string(i));

    const std::string side = detail::sidecar_path(path);
    std::ifstream cs(side);
    if (!cs) throw IoFailure("missing sidecar: " + side);
    std::string line;
    if (!std::getline(cs, line)) throw LabelCountMismatch(side + ": empty sidecar");
    while (std::getline(cs, line)) {
        if (line.empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (cols.size() != 4) throw LabelCountMismatch(side + ": expected 4 columns");
        fs.ids.push_back(cols[0]);
        fs.labels.push_back(static_cast<std::int32_t>(std::stol(cols[1])));
        fs.cameras.push_back(static_cast<std::int32_t>(std::stol(cols[2])));
        fs.roles.push_back(cols[3] == "query" ? Role::query : Role::gallery);
    }
    if (fs.ids.size() != fs.n)
        throw LabelCountMismatch(side + ": " + std::to_string(fs.ids.size()) +
                                 " rows, expected " + std::to_string(fs.n));
    fs.validate();
    return fs;
}

struct SynthSpec {
    std::size_t n_classes = 1;
    std::size_t per_class = 1;
    std::size_t dim = 1;
    double noise_sigma = 0.0;
    std::size_t queries_per_class = 0;
    std::uint64_t seed = 0;
};

// Gaussian clusters around unit-sphere centroids, L2-normalized points.
// Pure function of the spec; randomness comes from SplitMix64 only.
inline std::pair<FeatureSet, FeatureSet> synth_dataset(const SynthSpec& spec) {
    if (spec.n_classes < 1 || spec.per_class < 1 || spec.dim < 1)
        throw DegenerateSpec("synth: n_classes, per_class, dim must be positive");
    if (spec.per_class < spec.queries_per_class)
        throw DegenerateSpec("synth: per_class < queries_per_class");
    if (spec.noise_sigma < 0.0) throw DegenerateSpec("synth: negative noise_sigma");

    SplitMix64 rng(spec.seed);
    const std::size_t d = spec.dim;

    std::vector<std::vector<double>> centroids(spec.n_classes, std::vector<double>(d));
    for (auto& c : centroids) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                c[j] = rng.next_gaussian();
                norm2 += c[j] * c[j];
            }
        } while (norm2 < 1e-24);
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& v : c) v *= inv;
    }

    FeatureSet query, gallery;
    query.d = gallery.d = d;
    auto append = [&](FeatureSet& fs, const std::vector<double>& pt, std::size_t cls,
                      std::size_t idx_in_class, std::int32_t camera, Role role) {
        for (std::size_t j = 0; j < spec.dim; ++j)
            fs.features.push_back(static_cast<float>(pt[j]));
        fs.ids.push_back((role == Role::query ? "q" : "g") + std::to_string(cls) + "_" +
                         std::to_string(idx_in_class));
        fs.labels.push_back(static_cast<std::int32_t>(cls));
        fs.cameras.push_back(camera);
        fs.roles.push_back(role);
        ++fs.n;
    };

    std::vector<double> pt(d);
    for (std::size_t cls = 0; cls < spec.n_classes; ++cls) {
        for (std::size_t p = 0; p < spec.per_class; ++p) {
            double norm2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                pt[j] = centroids[cls][j] + spec.noise_sigma * rng.next_gaussian();
                norm2 += pt[j] * pt[j];
            }
            if (norm2 < 1e-24) { pt[0] = 1.0; norm2 = 1.0; }
            const double inv = 1.0 / std::sqrt(norm2);
            for (auto& v : pt) v *= inv;
            const std::int32_t camera = static_cast<std::int32_t>(p % 2);
            if (p < spec.queries_per_class)
                append(query, pt, cls, p, camera, Role::query);
            else
                append(gallery, pt, cls, p, camera, Role::gallery);
        }
    }
    if (query.n > 0) query.validate();
    gallery.validate();
    return {std::move(query), std::move(gallery)};
}

} // namespace rerank
