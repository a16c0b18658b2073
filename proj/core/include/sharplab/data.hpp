#pragma once

#include <string>

#include "sharplab/network.hpp"

namespace sharplab {

enum class DatasetKind { gaussians, moons, spirals, csv, idx };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::gaussians;
    std::size_t n = 300;
    std::size_t classes = 3;
    std::size_t dim = 2;
    double noise = 0.15;
    std::uint64_t seed = 0;
    std::string path;  // csv / idx only
};

DatasetKind parse_dataset_kind(const std::string& s);
std::string dataset_kind_name(DatasetKind k);

struct SplitBatch {
    SampleBatch train;
    SampleBatch test;
};

/// Deterministic synthetic data (or file ingestion), mapped into the [0,1]
/// box per coordinate and then scaled so the max L2 norm over the dataset
/// is 1, followed by a stratified 80/20 split.
SplitBatch gen_synthetic(const DatasetSpec& spec);

/// Raw generation without split, normalized the same way.
SampleBatch gen_batch(const DatasetSpec& spec);

/// MNIST-style IDX pair (images magic 0x00000803, labels 0x00000801,
/// big-endian dims, unsigned bytes). Pixels scaled to [0,1] then unit-ball
/// normalized.
SampleBatch load_idx(const std::string& images_path, const std::string& labels_path,
                     std::size_t limit = 0);

/// CSV with one sample per row: label, then d feature columns.
SampleBatch load_csv(const std::string& path, std::size_t classes);

/// In-place: min-max each coordinate to [0,1], then divide by the max L2
/// norm so every input satisfies ||x||_2 <= 1.
void normalize_unit_ball(SampleBatch& batch);

SplitBatch stratified_split(const SampleBatch& batch, double train_fraction, SeededRng rng);

}  // namespace sharplab
