// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "emsq/data.hpp"
#include "emsq/models.hpp"
#include "emsq/quantize.hpp"

namespace emsq {

/// Model container format. Little-endian throughout:
///   "EMSQ" | version u16 | kind u8 (0 dan, 1 lstm) | tensor count u32
///   per tensor: name len u16 + UTF-8 name | dtype u8 (0 f64, 1 q8, 2 q16)
///               | rows u32 | cols u32 | scale f64 (quantized only) | payload
/// Round trips are bit-exact; "model size" reporting uses the file length.
void save_model(const Model& model, const std::string& path);

/// Loads a full-precision file; quantized input is an error.
std::unique_ptr<Model> load_model(const std::string& path);

void save_quantized_model(const QuantizedModel& qm, const std::string& path);

/// Loads a quantized file; full-precision input is an error.
QuantizedModel load_quantized_model(const std::string& path);

struct LoadedModel {
    std::unique_ptr<Model> model;
    int bits = 0;  // 0 means full precision, else the quantized width
};

/// Loads either kind of file, expanding quantized tensors for inference.
LoadedModel load_any_model(const std::string& path);

std::size_t file_size_bytes(const std::string& path);

/// Tensor payload accounting over a model's f64 tensors.
std::size_t model_payload_bytes(const Model& model);        // 8 bytes per entry
std::size_t reference32_payload_bytes(const Model& model);  // 4 bytes per entry

/// One token per line, index order; the first line is the UNK token.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

}  // namespace emsq
