#include "nad/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace nad::io {

namespace {

constexpr char kMagic[4] = {'N', 'A', 'D', 'T'};
constexpr std::uint8_t kDtypeF32 = 1;

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("tensor file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

}  // namespace

void write_tensor(const Tensor& t, const std::string& path) {
    if (t.ndim() == 0 || t.ndim() > 255) throw ParamError("write_tensor: bad rank");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("write_tensor: cannot open " + path);
    os.write(kMagic, 4);
    os.put(static_cast<char>(kDtypeF32));
    os.put(static_cast<char>(t.ndim()));
    for (auto d : t.dims()) {
        if (d > 0xffffffffULL) throw ParamError("write_tensor: dim too large");
        put_u32le(os, static_cast<std::uint32_t>(d));
    }
    if (host_is_little_endian()) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &t[i], 4);
            put_u32le(os, bits);
        }
    }
    if (!os) throw FormatError("write_tensor: write failed for " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("read_tensor: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("read_tensor: bad magic in " + path);
    const int dtype = is.get();
    const int ndim = is.get();
    if (dtype != kDtypeF32) throw FormatError("read_tensor: unsupported dtype in " + path);
    if (ndim <= 0) throw FormatError("read_tensor: bad ndim in " + path);
    std::vector<std::size_t> dims(static_cast<std::size_t>(ndim));
    std::size_t count = 1;
    for (auto& d : dims) {
        d = get_u32le(is);
        if (d == 0) throw FormatError("read_tensor: zero dim in " + path);
        count *= d;
    }
    std::vector<float> data(count);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(float))
        throw FormatError("read_tensor: truncated data in " + path);
    if (!host_is_little_endian()) {
        for (auto& v : data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) | (bits >> 24);
            std::memcpy(&v, &bits, 4);
        }
    }
    return Tensor(std::move(dims), std::move(data));
}

void write_pgm(const Tensor& map, const std::string& path, float lo, float hi) {
    if (!(hi > lo)) throw ParamError("write_pgm: require hi > lo");
    std::size_t h = 0, w = 0;
    if (map.ndim() == 2) {
        h = map.dim(0);
        w = map.dim(1);
    } else if (map.ndim() == 3 && map.dim(0) == 1) {
        h = map.dim(1);
        w = map.dim(2);
    } else {
        throw ParamError("write_pgm: expected (H,W) or (1,H,W)");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("write_pgm: cannot open " + path);
    os << "P5\n" << w << " " << h << "\n255\n";
    const float scale = 1.0f / (hi - lo);
    for (std::size_t i = 0; i < h * w; ++i) {
        float u = (map[i] - lo) * scale;
        u = std::min(1.0f, std::max(0.0f, u));
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0f * u))));
    }
    if (!os) throw FormatError("write_pgm: write failed for " + path);
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["name"] = m.name;
    j["split"] = m.split;
    j["spatial_dims"] = m.spatial_dims;
    j["channels"] = m.channels;
    j["seed"] = m.seed;
    j["items"] = json::array();
    for (const auto& it : m.items) {
        json ji;
        ji["image"] = it.image_path;
        if (it.mask_path) ji["mask"] = *it.mask_path;
        if (!it.metadata.empty()) ji["metadata"] = it.metadata;
        j["items"].push_back(std::move(ji));
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("write_manifest: cannot open " + path);
    os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("load_manifest: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw FormatError("load_manifest: " + path + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.split = j.at("split").get<std::string>();
        m.spatial_dims = j.at("spatial_dims").get<std::vector<std::size_t>>();
        m.channels = j.at("channels").get<std::size_t>();
        m.seed = j.at("seed").get<std::int64_t>();
        for (const auto& ji : j.at("items")) {
            ManifestItem it;
            it.image_path = ji.at("image").get<std::string>();
            if (ji.contains("mask")) it.mask_path = ji.at("mask").get<std::string>();
            if (ji.contains("metadata"))
                it.metadata = ji.at("metadata").get<std::map<std::string, std::string>>();
            m.items.push_back(std::move(it));
        }
    } catch (const json::exception& e) {
        throw FormatError("load_manifest: " + path + ": " + e.what());
    }
    if (m.split != "train" && m.split != "val" && m.split != "test")
        throw FormatError("load_manifest: bad split '" + m.split + "' in " + path);
    m.base_dir = fs::path(path).parent_path().string();
    if (m.base_dir.empty()) m.base_dir = ".";

    std::vector<std::size_t> expect_img;
    expect_img.push_back(m.channels);
    for (auto d : m.spatial_dims) expect_img.push_back(d);

    for (std::size_t i = 0; i < m.items.size(); ++i) {
        const Tensor img = read_tensor(m.image_file(i));  // throws if missing/malformed
        if (img.dims() != expect_img)
            throw FormatError("load_manifest: image shape mismatch at item " + std::to_string(i));
        if (m.items[i].mask_path) {
            const Tensor mask = read_tensor(m.mask_file(i));
            if (mask.dims() != m.spatial_dims)
                throw FormatError("load_manifest: mask shape mismatch at item " + std::to_string(i));
            if (m.split == "train") {
                for (std::size_t k = 0; k < mask.size(); ++k)
                    if (mask[k] != 0.0f)
                        throw FormatError("load_manifest: train item " + std::to_string(i) +
                                          " has a non-empty mask (healthy-only training)");
            }
        }
    }
    return m;
}

std::vector<Tensor> load_images(const DatasetManifest& m) {
    std::vector<Tensor> out;
    out.reserve(m.items.size());
    for (std::size_t i = 0; i < m.items.size(); ++i) out.push_back(read_tensor(m.image_file(i)));
    return out;
}

std::vector<Tensor> load_masks(const DatasetManifest& m) {
    std::vector<Tensor> out;
    out.reserve(m.items.size());
    for (std::size_t i = 0; i < m.items.size(); ++i) {
        if (m.items[i].mask_path)
            out.push_back(read_tensor(m.mask_file(i)));
        else
            out.emplace_back(m.spatial_dims, 0.0f);
    }
    return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path, std::uint64_t h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("hash_file: cannot open " + path);
    char buf[1 << 14];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
    }
    return h;
}

std::string dataset_hash(const DatasetManifest& m, const std::string& manifest_path) {
    std::uint64_t h = hash_file(manifest_path);
    for (std::size_t i = 0; i < m.items.size(); ++i) {
        h = hash_file(m.image_file(i), h);
        if (m.items[i].mask_path) h = hash_file(m.mask_file(i), h);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace nad::io
