// SPDX-License-Identifier: Apache-2.0
#include "emsq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emsq {

QuantizedMatrix quantize(const DenseMatrix& m, int bits) {
    if (bits != 8 && bits != 16) {
        throw std::invalid_argument("quantize: bits must be 8 or 16, got " + std::to_string(bits));
    }
    m.require_finite("quantize input");
    const double qmax = bits == 8 ? 127.0 : 32767.0;
    double max_abs = 0.0;
    for (const double v : m.values()) {
        max_abs = std::max(max_abs, std::abs(v));
    }
    QuantizedMatrix q;
    q.rows = m.rows();
    q.cols = m.cols();
    q.bits = bits;
    q.scale = max_abs > 0.0 ? max_abs / qmax : 1.0;
    q.codes.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        double code = std::round(m.values()[i] / q.scale);
        code = std::min(qmax, std::max(-qmax, code));
        q.codes[i] = static_cast<std::int16_t>(code);
    }
    return q;
}

DenseMatrix dequantize(const QuantizedMatrix& q) {
    if (q.codes.size() != q.rows * q.cols) {
        throw std::invalid_argument("dequantize: code count does not match shape");
    }
    DenseMatrix m(q.rows, q.cols, 0.0);
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
        m.data()[i] = static_cast<double>(q.codes[i]) * q.scale;
    }
    return m;
}

std::size_t QuantizedModel::payload_bytes() const {
    std::size_t total = 0;
    for (const auto& [name, q] : tensors) {
        total += q.code_bytes();
    }
    return total;
}

QuantizedModel quantize_model(const Model& model, int bits) {
    QuantizedModel qm;
    qm.kind = model.kind();
    qm.bits = bits;
    for (const auto& [name, tensor] : model.named_tensors()) {
        qm.tensors.emplace_back(name, quantize(*tensor, bits));
    }
    return qm;
}

std::unique_ptr<Model> dequantize_model(const QuantizedModel& qm) {
    std::vector<std::pair<std::string, DenseMatrix>> tensors;
    tensors.reserve(qm.tensors.size());
    for (const auto& [name, q] : qm.tensors) {
        tensors.emplace_back(name, dequantize(q));
    }
    return assemble_model(qm.kind, std::move(tensors));
}

}  // namespace emsq
