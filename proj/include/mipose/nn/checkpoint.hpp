#pragma once

// Versioned checkpoint container: a text header (magic, one-line JSON
// metadata, tensor manifest) followed by raw little-endian value blocks in
// manifest order. Optimizer state tensors ride along under their "opt."
// names, so reloading a checkpoint resumes training exactly.
//
//   MIPOSE-CKPT 1
//   meta {...}
//   tensor <name> <f32|f64> <rank> <dim0> <dim1> ...
//   ...
//   data
//   <raw blocks>

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipose/nn/store.hpp"

namespace mipose::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline constexpr const char* kCheckpointMagic = "MIPOSE-CKPT 1";

namespace detail {

template <typename T>
constexpr const char* dtype_tag() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else if constexpr (std::is_same_v<T, double>) return "f64";
    else static_assert(sizeof(T) == 0, "unsupported checkpoint dtype");
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store,
                     const nlohmann::json& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);

    out << kCheckpointMagic << '\n';
    out << "meta " << meta.dump() << '\n';
    for (const auto& name : store.names()) {
        if (name.find_first_of(" \n\t") != std::string::npos)
            throw std::invalid_argument("save_checkpoint: tensor name '" + name +
                                        "' contains whitespace");
        const Tensor<T>& t = store.get(name);
        out << "tensor " << name << ' ' << detail::dtype_tag<T>() << ' ' << t.rank();
        for (int d : t.shape) out << ' ' << d;
        out << '\n';
    }
    out << "data\n";
    for (const auto& name : store.names()) {
        const Tensor<T>& t = store.get(name);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

/// Load into an empty store; values are cast to T if the file's dtype
/// differs. Returns the checkpoint metadata.
template <typename T>
nlohmann::json load_checkpoint(const std::string& path, ParameterStore<T>& store) {
    if (!store.names().empty())
        throw std::invalid_argument("load_checkpoint: target store must be empty");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic)
        throw std::runtime_error("load_checkpoint: " + path +
                                 " is not a checkpoint (bad magic '" + line + "')");
    if (!std::getline(in, line) || line.rfind("meta ", 0) != 0)
        throw std::runtime_error("load_checkpoint: missing meta line in " + path);
    nlohmann::json meta = nlohmann::json::parse(line.substr(5));

    struct Entry {
        std::string name;
        std::string dtype;
        std::vector<int> shape;
    };
    std::vector<Entry> manifest;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string tag;
        Entry e;
        int rank = 0;
        ls >> tag >> e.name >> e.dtype >> rank;
        if (tag != "tensor" || !ls || rank < 0)
            throw std::runtime_error("load_checkpoint: bad manifest line '" + line + "'");
        if (e.dtype != "f32" && e.dtype != "f64")
            throw std::runtime_error("load_checkpoint: unknown dtype '" + e.dtype + "'");
        e.shape.resize(static_cast<std::size_t>(rank));
        for (auto& d : e.shape) ls >> d;
        if (!ls)
            throw std::runtime_error("load_checkpoint: bad manifest line '" + line + "'");
        manifest.push_back(std::move(e));
    }
    if (line != "data")
        throw std::runtime_error("load_checkpoint: missing data section in " + path);

    for (const auto& e : manifest) {
        Tensor<T> t(e.shape);
        const std::size_t n = t.numel();
        if (e.dtype == detail::dtype_tag<T>()) {
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(n * sizeof(T)));
        } else if (e.dtype == "f32") {
            std::vector<float> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
            for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<T>(buf[i]);
        } else {
            std::vector<double> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(n * sizeof(double)));
            for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<T>(buf[i]);
        }
        if (!in)
            throw std::runtime_error("load_checkpoint: truncated data for tensor '" +
                                     e.name + "' in " + path);
        store.add(e.name, std::move(t));
    }
    return meta;
}

}  // namespace mipose::nn
