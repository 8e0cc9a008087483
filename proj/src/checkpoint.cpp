#include "cola/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace cola {

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

struct Reader {
    std::span<const std::byte> data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw FormatError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return s;
    }
    std::span<const std::byte> raw(std::size_t n) {
        need(n);
        auto s = data.subspan(pos, n);
        pos += n;
        return s;
    }
};

void put_tensor(std::vector<std::byte>& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    for (char c : name) out.push_back(static_cast<std::byte>(c));
    out.push_back(static_cast<std::byte>(t.dtype() == Dtype::F32 ? 0 : 1));
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    const auto b = t.bytes();
    out.insert(out.end(), b.begin(), b.end());
}

std::pair<std::string, Tensor> read_tensor(Reader& r) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint8_t dt = r.u8();
    if (dt > 1) throw FormatError("checkpoint: unknown dtype tag " + std::to_string(int(dt)));
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(static_cast<std::size_t>(r.u64()));
    Tensor t(shape, dt == 0 ? Dtype::F32 : Dtype::F64);
    const auto raw = r.raw(t.bytes().size());
    std::memcpy(t.bytes().data(), raw.data(), raw.size());
    return {std::move(name), std::move(t)};
}

std::vector<std::byte> encode(const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::vector<std::byte> out;
    out.push_back(static_cast<std::byte>('C'));
    out.push_back(static_cast<std::byte>('O'));
    out.push_back(static_cast<std::byte>('L'));
    out.push_back(static_cast<std::byte>('A'));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) put_tensor(out, name, t);
    return out;
}

std::vector<std::pair<std::string, Tensor>> decode(std::span<const std::byte> bytes) {
    Reader r{bytes};
    const std::string magic = r.str(4);
    if (magic != "COLA") throw FormatError("bad magic '" + magic + "' (expected COLA)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kCheckpointVersion) + ")");
    const std::uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(read_tensor(r));
    return tensors;
}

std::vector<std::pair<std::string, Tensor>> adapter_tensors(const Adapter& a, const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < a.num_params(); ++i) out.emplace_back(prefix + a.param_name(i), a.param(i));
    out.emplace_back(prefix + "alpha", Tensor::full({1}, a.spec().alpha, Dtype::F64));
    return out;
}

Adapter adapter_from_tensors(std::map<std::string, Tensor>& named) {
    AdapterSpec spec;
    std::vector<Tensor> params;
    const auto alpha_it = named.find("alpha");
    spec.alpha = alpha_it != named.end() ? alpha_it->second.at(0) : 1.0;
    if (named.count("A") && named.count("B")) {
        spec.kind = AdapterKind::LowRank;
        const Tensor& A = named.at("A");
        const Tensor& B = named.at("B");
        spec.rank = static_cast<int>(A.rows());
        spec.in_dim = static_cast<int>(A.cols());
        spec.out_dim = static_cast<int>(B.rows());
        params = {A, B};
    } else if (named.count("W1")) {
        spec.kind = AdapterKind::Mlp;
        const Tensor& W1 = named.at("W1");
        const Tensor& W2 = named.at("W2");
        spec.hidden = static_cast<int>(W1.rows());
        spec.in_dim = static_cast<int>(W1.cols());
        spec.out_dim = static_cast<int>(W2.rows());
        params = {W1, named.at("b1"), W2, named.at("b2")};
    } else if (named.count("W")) {
        spec.kind = AdapterKind::Linear;
        const Tensor& W = named.at("W");
        spec.in_dim = static_cast<int>(W.cols());
        spec.out_dim = static_cast<int>(W.rows());
        params = {W};
    } else {
        throw FormatError("checkpoint: adapter parameter set is incomplete");
    }
    return Adapter::from_params(spec, std::move(params));
}

} // namespace

std::vector<std::byte> adapter_to_bytes(const Adapter& adapter) {
    return encode(adapter_tensors(adapter, ""));
}

Adapter adapter_from_bytes(std::span<const std::byte> bytes) {
    auto tensors = decode(bytes);
    std::map<std::string, Tensor> named;
    for (auto& [name, t] : tensors) named.emplace(name, std::move(t));
    return adapter_from_tensors(named);
}

void save_checkpoint(const std::string& path, const std::vector<AdapterSet>& users) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (std::size_t k = 0; k < users.size(); ++k) {
        for (std::size_t m = 0; m < users[k].slots.size(); ++m) {
            const auto& a = users[k].slots[m];
            if (!a) continue;
            const std::string prefix = "m" + std::to_string(m) + ".k" + std::to_string(k) + ".";
            for (auto& nt : adapter_tensors(*a, prefix)) tensors.push_back(std::move(nt));
        }
    }
    const auto bytes = encode(tensors);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write checkpoint to " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("short write to " + path);
}

std::vector<AdapterSet> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot read checkpoint from " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    auto tensors = decode({reinterpret_cast<const std::byte*>(raw.data()), raw.size()});

    // Group by (m, k) prefix.
    std::map<std::pair<int, int>, std::map<std::string, Tensor>> groups;
    for (auto& [name, t] : tensors) {
        const auto dot1 = name.find('.');
        const auto dot2 = name.find('.', dot1 + 1);
        if (dot1 == std::string::npos || dot2 == std::string::npos || name[0] != 'm' ||
            name[dot1 + 1] != 'k')
            throw FormatError("checkpoint: unexpected tensor name '" + name + "'");
        const int m = std::stoi(name.substr(1, dot1 - 1));
        const int k = std::stoi(name.substr(dot1 + 2, dot2 - dot1 - 2));
        groups[{m, k}].emplace(name.substr(dot2 + 1), std::move(t));
    }
    int max_m = -1, max_k = -1;
    for (const auto& [mk, _] : groups) {
        max_m = std::max(max_m, mk.first);
        max_k = std::max(max_k, mk.second);
    }
    std::vector<AdapterSet> users(static_cast<std::size_t>(max_k + 1));
    for (auto& set : users) set.slots.assign(static_cast<std::size_t>(max_m + 1), nullptr);
    for (auto& [mk, named] : groups)
        users[static_cast<std::size_t>(mk.second)].slots[static_cast<std::size_t>(mk.first)] =
            std::make_shared<Adapter>(adapter_from_tensors(named));
    return users;
}

} // namespace cola
