#pragma once

#include <string>
#include <vector>

#include "pil/dataset.hpp"
#include "pil/linear.hpp"
#include "pil/mlp.hpp"

namespace pil {

// "PILD" container (little-endian):
//   magic "PILD" | u16 version=1 | u8 kind | u8 dtype | u64 n |
//   u16 channels | u16 height | u16 width | u16 k | f32 epsilon | u64 seed |
//   labels (n bytes, datasets only) | row-major payload.
// kind: 0=dataset, 1=perturbations, 2=weights, 3=model.
// dtype: 0=f32, 1=u8 (datasets only).
// Weights append u64 d, u16 k before the payload; models append a layer
// manifest (u32 count, then u64 widths) before their payloads.

enum class PayloadKind : std::uint8_t {
    Dataset = 0,
    Perturbations = 1,
    Weights = 2,
    Model = 3,
};

// Standard CIFAR-10 binary batches: per record 1 label byte then 3072 pixel
// bytes (row-major R,G,B planes). Records concatenated in file order.
LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths);

void save_dataset(const LabeledDataset& ds, const std::string& path, bool as_u8 = false);
LabeledDataset load_dataset(const std::string& path);

void save_perturbations(const PerturbationSet& ps, const std::string& path);
PerturbationSet load_perturbations(const std::string& path);

void save_weights(const LinearWeights& w, const std::string& path);
LinearWeights load_weights(const std::string& path);

void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);

// FNV-1a of a file's bytes; used by determinism checks.
std::uint64_t hash_file(const std::string& path);

}  // namespace pil
