#include "cola/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "cola/rng.hpp"

namespace cola {

Tensor DatasetHandle::gather(std::span<const std::int64_t> rows, Dtype dt) const {
    Tensor out({rows.size(), dim}, dt);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= n)
            throw ShapeError("dataset gather: row out of range");
        const float* src = inputs.data() + static_cast<std::size_t>(rows[i]) * dim;
        for (std::size_t j = 0; j < dim; ++j) out.set(i * dim + j, static_cast<double>(src[j]));
    }
    return out;
}

std::vector<int> DatasetHandle::gather_labels(std::span<const std::int64_t> rows) const {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[static_cast<std::size_t>(rows[i])];
    return out;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX file " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

char hexdigit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string hex32(std::uint32_t v) {
    std::string s = "0x";
    for (int i = 7; i >= 0; --i) s.push_back(hexdigit((v >> (4 * i)) & 0xf));
    return s;
}

} // namespace

DatasetHandle load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw FormatError("cannot open IDX image file " + images_path);
    const std::uint32_t magic_i = read_be_u32(fi, images_path);
    if (magic_i != 0x00000803u)
        throw FormatError("bad magic " + hex32(magic_i) + " in " + images_path + " (expected 0x00000803)");
    const std::uint32_t count = read_be_u32(fi, images_path);
    const std::uint32_t rows = read_be_u32(fi, images_path);
    const std::uint32_t cols = read_be_u32(fi, images_path);

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw FormatError("cannot open IDX label file " + labels_path);
    const std::uint32_t magic_l = read_be_u32(fl, labels_path);
    if (magic_l != 0x00000801u)
        throw FormatError("bad magic " + hex32(magic_l) + " in " + labels_path + " (expected 0x00000801)");
    const std::uint32_t count_l = read_be_u32(fl, labels_path);
    if (count != count_l)
        throw FormatError("IDX pair mismatch: " + std::to_string(count) + " images vs " +
                          std::to_string(count_l) + " labels");

    DatasetHandle ds;
    ds.name = "mnist";
    ds.n = count;
    ds.dim = static_cast<std::size_t>(rows) * cols;
    ds.classes = 10;
    ds.inputs.resize(ds.n * ds.dim);
    ds.labels.resize(ds.n);

    std::vector<unsigned char> buf(ds.dim);
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (!fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(ds.dim)))
            throw FormatError("truncated IDX image data in " + images_path);
        for (std::size_t j = 0; j < ds.dim; ++j)
            ds.inputs[i * ds.dim + j] = static_cast<float>(buf[j]) / 255.0f;
    }
    std::vector<unsigned char> lab(ds.n);
    if (!fl.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(ds.n)))
        throw FormatError("truncated IDX label data in " + labels_path);
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (lab[i] > 9) throw FormatError("IDX label " + std::to_string(int(lab[i])) + " out of range");
        ds.labels[i] = static_cast<int>(lab[i]);
    }
    return ds;
}

DatasetHandle synth_dataset(int classes, int per_class, int dims, double separation, std::uint64_t seed) {
    if (classes < 1 || per_class < 1 || dims < 1) throw ConfigError("synth_dataset: C, n, d must be >= 1");
    Rng rng = Rng(seed).fork(0x5b0b5ULL);

    // Class means: random directions, orthogonalized where dimension allows,
    // scaled by the separation.
    std::vector<std::vector<double>> means(static_cast<std::size_t>(classes),
                                           std::vector<double>(static_cast<std::size_t>(dims), 0.0));
    for (auto& mu : means) {
        for (auto& v : mu) v = rng.gaussian();
    }
    for (std::size_t c = 0; c < means.size(); ++c) {
        auto& mu = means[c];
        const std::size_t limit = std::min(c, static_cast<std::size_t>(dims));
        for (std::size_t p = 0; p < limit; ++p) {
            double dot = 0.0, nn = 0.0;
            for (int j = 0; j < dims; ++j) {
                dot += mu[static_cast<std::size_t>(j)] * means[p][static_cast<std::size_t>(j)];
                nn += means[p][static_cast<std::size_t>(j)] * means[p][static_cast<std::size_t>(j)];
            }
            if (nn > 0)
                for (int j = 0; j < dims; ++j)
                    mu[static_cast<std::size_t>(j)] -= dot / nn * means[p][static_cast<std::size_t>(j)];
        }
        double norm = 0.0;
        for (double v : mu) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 1e-12)
            for (double& v : mu) v = v / norm * separation;
    }

    DatasetHandle ds;
    ds.name = "synth";
    ds.n = static_cast<std::size_t>(classes) * static_cast<std::size_t>(per_class);
    ds.dim = static_cast<std::size_t>(dims);
    ds.classes = classes;
    ds.inputs.resize(ds.n * ds.dim);
    ds.labels.resize(ds.n);

    // Interleave classes, then shuffle row order for balanced batches.
    std::vector<std::int64_t> order(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) order[i] = static_cast<std::int64_t>(i);
    shuffle(order, rng);
    for (std::size_t slot = 0; slot < ds.n; ++slot) {
        const std::size_t i = static_cast<std::size_t>(order[slot]);
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        ds.labels[slot] = c;
        for (int j = 0; j < dims; ++j)
            ds.inputs[slot * ds.dim + static_cast<std::size_t>(j)] =
                static_cast<float>(means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                                   rng.gaussian());
    }
    return ds;
}

std::pair<DatasetHandle, DatasetHandle> split_dataset(const DatasetHandle& ds, double train_frac) {
    if (train_frac <= 0.0 || train_frac >= 1.0) throw ConfigError("split fraction must be in (0, 1)");
    const std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(ds.n));
    if (n_train == 0 || n_train == ds.n) throw ConfigError("split leaves an empty side");
    auto take = [&](std::size_t lo, std::size_t hi, const char* split) {
        DatasetHandle out;
        out.name = ds.name;
        out.split = split;
        out.dim = ds.dim;
        out.classes = ds.classes;
        out.n = hi - lo;
        out.inputs.assign(ds.inputs.begin() + static_cast<std::ptrdiff_t>(lo * ds.dim),
                          ds.inputs.begin() + static_cast<std::ptrdiff_t>(hi * ds.dim));
        out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(lo),
                          ds.labels.begin() + static_cast<std::ptrdiff_t>(hi));
        return out;
    };
    return {take(0, n_train, "train"), take(n_train, ds.n, "test")};
}

} // namespace cola
