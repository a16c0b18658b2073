#include "sharplab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sharplab {

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "gaussians") return DatasetKind::gaussians;
    if (s == "moons") return DatasetKind::moons;
    if (s == "spirals") return DatasetKind::spirals;
    if (s == "csv") return DatasetKind::csv;
    if (s == "idx") return DatasetKind::idx;
    throw std::invalid_argument("unknown dataset kind: " + s);
}

std::string dataset_kind_name(DatasetKind k) {
    switch (k) {
        case DatasetKind::gaussians: return "gaussians";
        case DatasetKind::moons: return "moons";
        case DatasetKind::spirals: return "spirals";
        case DatasetKind::csv: return "csv";
        case DatasetKind::idx: return "idx";
    }
    return "?";
}

void normalize_unit_ball(SampleBatch& batch) {
    const std::size_t n = batch.size();
    const std::size_t d = batch.inputs.cols();
    if (n == 0) return;
    // min-max each coordinate into [0,1]
    for (std::size_t j = 0; j < d; ++j) {
        double lo = batch.inputs(0, j), hi = batch.inputs(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, batch.inputs(i, j));
            hi = std::max(hi, batch.inputs(i, j));
        }
        const double span = hi > lo ? hi - lo : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            batch.inputs(i, j) = (batch.inputs(i, j) - lo) / span;
    }
    // scale so max ||x||_2 over the dataset is 1 (stays inside the box)
    double max_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += batch.inputs(i, j) * batch.inputs(i, j);
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    if (max_norm > 0.0)
        for (auto& v : batch.inputs.data()) v /= max_norm;
}

namespace {

SampleBatch gen_gaussians(const DatasetSpec& spec, SeededRng& rng) {
    SampleBatch batch;
    batch.inputs = Matrix(spec.n, spec.dim);
    // class means on a circle (first two coordinates), well separated
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = i % spec.classes;
        const double angle = 2.0 * M_PI * c / static_cast<double>(spec.classes);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            double mean = 0.0;
            if (j == 0) mean = std::cos(angle);
            if (j == 1) mean = std::sin(angle);
            batch.inputs(i, j) = mean + spec.noise * rng.normal();
        }
        batch.labels.push_back(c);
    }
    return batch;
}

SampleBatch gen_moons(const DatasetSpec& spec, SeededRng& rng) {
    if (spec.classes != 2) throw std::invalid_argument("moons: requires exactly 2 classes");
    SampleBatch batch;
    batch.inputs = Matrix(spec.n, spec.dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = i % 2;
        const double t = M_PI * rng.uniform();
        double x, y;
        if (c == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        batch.inputs(i, 0) = x + spec.noise * rng.normal();
        if (spec.dim > 1) batch.inputs(i, 1) = y + spec.noise * rng.normal();
        for (std::size_t j = 2; j < spec.dim; ++j) batch.inputs(i, j) = spec.noise * rng.normal();
        batch.labels.push_back(c);
    }
    return batch;
}

SampleBatch gen_spirals(const DatasetSpec& spec, SeededRng& rng) {
    SampleBatch batch;
    batch.inputs = Matrix(spec.n, spec.dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = i % spec.classes;
        const double t = rng.uniform();
        const double radius = 0.1 + 0.9 * t;
        const double angle =
            2.0 * M_PI * (1.5 * t + static_cast<double>(c) / spec.classes);
        batch.inputs(i, 0) = radius * std::cos(angle) + spec.noise * rng.normal();
        if (spec.dim > 1) batch.inputs(i, 1) = radius * std::sin(angle) + spec.noise * rng.normal();
        for (std::size_t j = 2; j < spec.dim; ++j) batch.inputs(i, j) = spec.noise * rng.normal();
        batch.labels.push_back(c);
    }
    return batch;
}

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

SampleBatch load_idx(const std::string& images_path, const std::string& labels_path,
                     std::size_t limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be32(img) != 0x00000803u)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    const std::uint32_t n = read_be32(img);
    const std::uint32_t rows = read_be32(img);
    const std::uint32_t cols = read_be32(img);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be32(lab) != 0x00000801u)
        throw std::runtime_error("idx: bad label magic in " + labels_path);
    const std::uint32_t nl = read_be32(lab);
    if (nl != n) throw std::runtime_error("idx: image/label count mismatch");

    const std::size_t take = limit > 0 ? std::min<std::size_t>(limit, n) : n;
    SampleBatch batch;
    batch.inputs = Matrix(take, std::size_t(rows) * cols);
    std::vector<unsigned char> buf(std::size_t(rows) * cols);
    for (std::size_t i = 0; i < take; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!img) throw std::runtime_error("idx: truncated image data");
        for (std::size_t j = 0; j < buf.size(); ++j)
            batch.inputs(i, j) = static_cast<double>(buf[j]) / 255.0;
        char lbl;
        lab.read(&lbl, 1);
        if (!lab) throw std::runtime_error("idx: truncated label data");
        batch.labels.push_back(static_cast<unsigned char>(lbl));
    }
    normalize_unit_ball(batch);
    return batch;
}

SampleBatch load_csv(const std::string& path, std::size_t classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 2) throw std::runtime_error("csv: need a label and >=1 feature");
        const auto label = static_cast<std::size_t>(vals[0]);
        if (label >= classes) throw std::runtime_error("csv: label out of range");
        labels.push_back(label);
        rows.emplace_back(vals.begin() + 1, vals.end());
    }
    if (rows.empty()) throw std::runtime_error("csv: empty file");
    SampleBatch batch;
    batch.inputs = Matrix(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw std::runtime_error("csv: ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) batch.inputs(i, j) = rows[i][j];
    }
    batch.labels = std::move(labels);
    normalize_unit_ball(batch);
    return batch;
}

SampleBatch gen_batch(const DatasetSpec& spec) {
    if (spec.kind == DatasetKind::csv) return load_csv(spec.path, spec.classes);
    if (spec.kind == DatasetKind::idx) {
        // spec.path holds "images_path;labels_path"
        const auto sep = spec.path.find(';');
        if (sep == std::string::npos)
            throw std::invalid_argument("idx: path must be 'images;labels'");
        return load_idx(spec.path.substr(0, sep), spec.path.substr(sep + 1), spec.n);
    }
    if (spec.n == 0) throw std::invalid_argument("gen_batch: empty batch requested");
    if (spec.dim == 0 || spec.classes == 0)
        throw std::invalid_argument("gen_batch: dim and classes must be positive");
    SeededRng rng(spec.seed, 0xda7aULL);
    SampleBatch batch;
    switch (spec.kind) {
        case DatasetKind::gaussians: batch = gen_gaussians(spec, rng); break;
        case DatasetKind::moons: batch = gen_moons(spec, rng); break;
        case DatasetKind::spirals: batch = gen_spirals(spec, rng); break;
        default: throw std::invalid_argument("gen_batch: unsupported kind");
    }
    normalize_unit_ball(batch);
    return batch;
}

SplitBatch stratified_split(const SampleBatch& batch, double train_fraction, SeededRng rng) {
    std::vector<std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.labels[i] >= by_class.size()) by_class.resize(batch.labels[i] + 1);
        by_class[batch.labels[i]].push_back(i);
    }
    std::vector<std::size_t> train_idx, test_idx;
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        const std::size_t n_train =
            static_cast<std::size_t>(std::round(train_fraction * idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train_idx : test_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto gather = [&](const std::vector<std::size_t>& idx) {
        SampleBatch out;
        out.inputs = Matrix(idx.size(), batch.inputs.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < batch.inputs.cols(); ++j)
                out.inputs(i, j) = batch.inputs(idx[i], j);
            out.labels.push_back(batch.labels[idx[i]]);
        }
        return out;
    };
    return {gather(train_idx), gather(test_idx)};
}

SplitBatch gen_synthetic(const DatasetSpec& spec) {
    const SampleBatch batch = gen_batch(spec);
    return stratified_split(batch, 0.8, SeededRng(spec.seed, 0x5b117ULL));
}

}  // namespace sharplab
