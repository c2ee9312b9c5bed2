#include "cpmoe/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cpmoe/rng.hpp"
#include "nlohmann/json.hpp"

namespace cpmoe::nn {

using json = nlohmann::json;

Tensor& ParameterStore::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

static uint64_t name_key(uint64_t seed, const std::string& name) {
    uint64_t h = mix64(seed);
    for (char c : name) h = hash_combine(h, static_cast<uint64_t>(static_cast<unsigned char>(c)));
    return h;
}

Tensor& ParameterStore::create_weight(const std::string& name, std::vector<int> shape, int fan_in, uint64_t seed) {
    Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    uint64_t key = name_key(seed, name);
    for (int64_t i = 0; i < t.size(); ++i)
        t.data[i] = (2.0 * rng_uniform(key, static_cast<uint64_t>(i)) - 1.0) * bound;
    return tensors[name] = std::move(t);
}

Tensor& ParameterStore::create_embedding(const std::string& name, std::vector<int> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    uint64_t key = name_key(seed, name);
    for (int64_t i = 0; i < t.size(); ++i) t.data[i] = 0.1 * rng_normal(key, static_cast<uint64_t>(i));
    return tensors[name] = std::move(t);
}

Tensor& ParameterStore::create_zeros(const std::string& name, std::vector<int> shape) {
    return tensors[name] = Tensor::zeros(std::move(shape));
}

int64_t ParameterStore::total_elements() const {
    int64_t n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
}

Var ParamBinding::operator()(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    Var v = g_->leaf(store_->at(name), true);
    vars_.emplace(name, v);
    return v;
}

std::map<std::string, Tensor> ParamBinding::grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : vars_) {
        if (g_->has_grad(v))
            out.emplace(name, g_->grad(v));
        else
            out.emplace(name, Tensor::zeros(g_->val(v).shape));
    }
    return out;
}

void save_checkpoint(const ParameterStore& store, const std::string& path, const std::string& meta_json) {
    json hdr;
    hdr["format_version"] = 1;
    hdr["dtype"] = "float64";
    if (!meta_json.empty()) hdr["meta"] = json::parse(meta_json);
    json entries = json::array();
    int64_t offset = 0;
    for (const auto& [name, t] : store.tensors) {
        json e;
        e["name"] = name;
        e["shape"] = t.shape;
        e["offset"] = offset;
        entries.push_back(std::move(e));
        offset += t.size() * static_cast<int64_t>(sizeof(double));
    }
    hdr["tensors"] = std::move(entries);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    std::string h = hdr.dump();
    f << h << '\n';
    for (const auto& [name, t] : store.tensors)
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::string load_checkpoint(ParameterStore& store, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint missing header: " + path);
    json hdr;
    try {
        hdr = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint header is not valid JSON: " + std::string(e.what()));
    }
    if (!hdr.contains("format_version") || hdr["format_version"].get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint format version");
    if (hdr.value("dtype", "") != "float64") throw std::runtime_error("unsupported checkpoint dtype");
    std::streampos payload_start = f.tellg();
    store.tensors.clear();
    for (const auto& e : hdr.at("tensors")) {
        std::string name = e.at("name").get<std::string>();
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        int64_t offset = e.at("offset").get<int64_t>();
        Tensor t(shape);
        f.seekg(payload_start + static_cast<std::streamoff>(offset));
        f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint payload truncated at tensor " + name);
        store.tensors.emplace(std::move(name), std::move(t));
    }
    return hdr.contains("meta") ? hdr["meta"].dump() : std::string();
}

}  // namespace cpmoe::nn
