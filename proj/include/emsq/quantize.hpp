// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emsq/matrix.hpp"
#include "emsq/models.hpp"

namespace emsq {

/// Symmetric fixed-point image of a matrix: entry ~= code * scale, codes
/// bounded by 2^(bits-1) - 1. 8-bit codes are stored widened but serialize
/// at their true width.
struct QuantizedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int bits = 8;
    double scale = 1.0;
    std::vector<std::int16_t> codes;

    /// Bytes the codes occupy on disk: rows * cols * bits/8.
    std::size_t code_bytes() const { return rows * cols * static_cast<std::size_t>(bits) / 8; }
};

/// Per-tensor quantization: scale = max|entry| / (2^(bits-1) - 1), codes
/// rounded half away from zero. All-zero input gets scale 1.
QuantizedMatrix quantize(const DenseMatrix& m, int bits);

DenseMatrix dequantize(const QuantizedMatrix& q);

/// A model with every tensor quantized independently; no retraining.
struct QuantizedModel {
    std::string kind;
    int bits = 8;
    std::vector<std::pair<std::string, QuantizedMatrix>> tensors;

    std::size_t payload_bytes() const;
};

QuantizedModel quantize_model(const Model& model, int bits);

/// 64-bit inference path: expands every tensor and reassembles the model.
std::unique_ptr<Model> dequantize_model(const QuantizedModel& qm);

}  // namespace emsq
