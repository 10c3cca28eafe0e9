// SPDX-License-Identifier: Apache-2.0
#include "emsq/serialize.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace emsq {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'S', 'Q'};
constexpr std::uint16_t kVersion = 1;

std::uint8_t kind_byte(const std::string& kind) {
    if (kind == "dan") return 0;
    if (kind == "lstm") return 1;
    throw std::invalid_argument("unknown model kind: " + kind);
}

std::string kind_name(std::uint8_t b) {
    if (b == 0) return "dan";
    if (b == 1) return "lstm";
    throw std::runtime_error("unknown model kind byte: " + std::to_string(b));
}

void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_u16(std::string& buf, std::uint16_t v) {
    put_u8(buf, static_cast<std::uint8_t>(v & 0xFF));
    put_u8(buf, static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        put_u8(buf, static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        put_u8(buf, static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string& path;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw std::runtime_error("truncated model file: " + path);
        }
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        const std::uint16_t hi = u8();
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void write_file(const std::string& path, const std::string& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + path);
    }
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

void put_header(std::string& buf, const std::string& kind, std::size_t tensor_count) {
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u8(buf, kind_byte(kind));
    put_u32(buf, static_cast<std::uint32_t>(tensor_count));
}

void put_tensor_head(std::string& buf, const std::string& name, std::uint8_t dtype,
                     std::size_t rows, std::size_t cols) {
    if (name.size() > 0xFFFF) {
        throw std::invalid_argument("tensor name too long: " + name);
    }
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    put_u8(buf, dtype);
    put_u32(buf, static_cast<std::uint32_t>(rows));
    put_u32(buf, static_cast<std::uint32_t>(cols));
}

struct RawTensor {
    std::string name;
    std::uint8_t dtype = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double scale = 1.0;
    std::vector<double> f64_data;
    std::vector<std::int16_t> codes;
};

struct ParsedFile {
    std::string kind;
    std::vector<RawTensor> tensors;
};

ParsedFile parse_file(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    const std::string magic = r.bytes(4);
    if (magic != std::string(kMagic, 4)) {
        throw std::runtime_error("not a model file (bad magic): " + path);
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw std::runtime_error("unsupported model file version " + std::to_string(version) +
                                 ": " + path);
    }
    ParsedFile parsed;
    parsed.kind = kind_name(r.u8());
    const std::uint32_t count = r.u32();
    parsed.tensors.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        RawTensor raw;
        raw.name = r.bytes(r.u16());
        raw.dtype = r.u8();
        raw.rows = r.u32();
        raw.cols = r.u32();
        const std::size_t n = raw.rows * raw.cols;
        if (raw.dtype == 0) {
            raw.f64_data.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                raw.f64_data.push_back(r.f64());
            }
        } else if (raw.dtype == 1 || raw.dtype == 2) {
            raw.scale = r.f64();
            raw.codes.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (raw.dtype == 1) {
                    raw.codes.push_back(static_cast<std::int8_t>(r.u8()));
                } else {
                    raw.codes.push_back(static_cast<std::int16_t>(r.u16()));
                }
            }
        } else {
            throw std::runtime_error("unknown tensor dtype " + std::to_string(raw.dtype) + ": " +
                                     path);
        }
        parsed.tensors.push_back(std::move(raw));
    }
    if (r.pos != buf.size()) {
        throw std::runtime_error("trailing bytes in model file: " + path);
    }
    return parsed;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
    const auto tensors = model.named_tensors();
    std::string buf;
    put_header(buf, model.kind(), tensors.size());
    for (const auto& [name, tensor] : tensors) {
        put_tensor_head(buf, name, 0, tensor->rows(), tensor->cols());
        for (const double v : tensor->values()) {
            put_f64(buf, v);
        }
    }
    write_file(path, buf);
}

std::unique_ptr<Model> load_model(const std::string& path) {
    ParsedFile parsed = parse_file(path);
    std::vector<std::pair<std::string, DenseMatrix>> tensors;
    tensors.reserve(parsed.tensors.size());
    for (auto& raw : parsed.tensors) {
        if (raw.dtype != 0) {
            throw std::runtime_error("expected a full-precision model, found quantized tensor " +
                                     raw.name + ": " + path);
        }
        tensors.emplace_back(raw.name,
                             DenseMatrix(raw.rows, raw.cols, std::move(raw.f64_data)));
    }
    return assemble_model(parsed.kind, std::move(tensors));
}

void save_quantized_model(const QuantizedModel& qm, const std::string& path) {
    if (qm.bits != 8 && qm.bits != 16) {
        throw std::invalid_argument("quantized model bits must be 8 or 16");
    }
    std::string buf;
    put_header(buf, qm.kind, qm.tensors.size());
    const std::uint8_t dtype = qm.bits == 8 ? 1 : 2;
    for (const auto& [name, q] : qm.tensors) {
        if (q.bits != qm.bits) {
            throw std::invalid_argument("tensor " + name + " bit width disagrees with model");
        }
        put_tensor_head(buf, name, dtype, q.rows, q.cols);
        put_f64(buf, q.scale);
        for (const std::int16_t code : q.codes) {
            if (qm.bits == 8) {
                put_u8(buf, static_cast<std::uint8_t>(static_cast<std::int8_t>(code)));
            } else {
                put_u16(buf, static_cast<std::uint16_t>(code));
            }
        }
    }
    write_file(path, buf);
}

QuantizedModel load_quantized_model(const std::string& path) {
    ParsedFile parsed = parse_file(path);
    QuantizedModel qm;
    qm.kind = parsed.kind;
    qm.bits = 0;
    for (auto& raw : parsed.tensors) {
        if (raw.dtype == 0) {
            throw std::runtime_error("expected a quantized model, found f64 tensor " + raw.name +
                                     ": " + path);
        }
        const int bits = raw.dtype == 1 ? 8 : 16;
        if (qm.bits == 0) {
            qm.bits = bits;
        } else if (qm.bits != bits) {
            throw std::runtime_error("mixed tensor bit widths in " + path);
        }
        QuantizedMatrix q;
        q.rows = raw.rows;
        q.cols = raw.cols;
        q.bits = bits;
        q.scale = raw.scale;
        q.codes = std::move(raw.codes);
        qm.tensors.emplace_back(raw.name, std::move(q));
    }
    if (qm.bits == 0) {
        throw std::runtime_error("quantized model has no tensors: " + path);
    }
    return qm;
}

LoadedModel load_any_model(const std::string& path) {
    const ParsedFile parsed = parse_file(path);
    bool any_quantized = false;
    for (const auto& raw : parsed.tensors) {
        if (raw.dtype != 0) {
            any_quantized = true;
            break;
        }
    }
    LoadedModel out;
    if (any_quantized) {
        const QuantizedModel qm = load_quantized_model(path);
        out.model = dequantize_model(qm);
        out.bits = qm.bits;
    } else {
        out.model = load_model(path);
        out.bits = 0;
    }
    return out;
}

std::size_t file_size_bytes(const std::string& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw std::runtime_error("cannot stat file: " + path + " (" + ec.message() + ")");
    }
    return static_cast<std::size_t>(size);
}

std::size_t model_payload_bytes(const Model& model) {
    std::size_t total = 0;
    for (const auto& [name, tensor] : model.named_tensors()) {
        total += tensor->size() * sizeof(double);
    }
    return total;
}

std::size_t reference32_payload_bytes(const Model& model) {
    std::size_t total = 0;
    for (const auto& [name, tensor] : model.named_tensors()) {
        total += tensor->size() * 4;
    }
    return total;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    for (const std::string& token : vocab.tokens()) {
        out << token << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open vocabulary file: " + path);
    }
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            if (line != Vocabulary::kUnkToken) {
                throw std::runtime_error(path + ": first vocabulary entry must be " +
                                         std::string(Vocabulary::kUnkToken));
            }
            continue;
        }
        vocab.add(line);
    }
    if (line_no == 0) {
        throw std::runtime_error("empty vocabulary file: " + path);
    }
    return vocab;
}

}  // namespace emsq
