// SPDX-License-Identifier: Apache-2.0
// "R1DC" binary model files for float64 classifiers, teachers and
// Q2.13 quantized classifiers.
//
// Layout (little-endian):
//   magic "R1DC" | u16 version | u8 precision (0 f64, 1 Q2.13) | u32 layers
//   per layer: u8 type | shape | weights row-major, then biases
// Conv shape is u32 out, in, kernel, stride; dense is u32 out, in; fusion is u32 n.
#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <string>
#include <vector>

#include "seizurekd/common.hpp"
#include "seizurekd/quant.hpp"
#include "seizurekd/res1dcnn.hpp"

namespace seizurekd {

inline constexpr std::string_view kR1dcMagic = "R1DC";  // 52 31 44 43
inline constexpr std::uint16_t kR1dcVersion = 1;

enum class Precision : std::uint8_t { float64 = 0, q2_13 = 1 };

enum class LayerTag : std::uint8_t { stem = 1, block_conv1 = 2, block_conv2 = 3, projection = 4, dense = 5, fusion = 6 };

enum class ModelKind { classifier, teacher, quantized };

namespace detail {

inline void write_header(ByteWriter& w, Precision p, std::uint32_t layers) {
  w.raw(kR1dcMagic);
  w.u16(kR1dcVersion);
  w.u8(static_cast<std::uint8_t>(p));
  w.u32(layers);
}

inline void write_conv_shape(ByteWriter& w, LayerTag tag, std::size_t out, std::size_t in, std::size_t k, std::size_t s) {
  w.u8(static_cast<std::uint8_t>(tag));
  w.u32(static_cast<std::uint32_t>(out));
  w.u32(static_cast<std::uint32_t>(in));
  w.u32(static_cast<std::uint32_t>(k));
  w.u32(static_cast<std::uint32_t>(s));
}

inline void write_conv(ByteWriter& w, LayerTag tag, const Conv1dLayer& l) {
  write_conv_shape(w, tag, l.out_channels, l.in_channels, l.kernel, l.stride);
  for (double v : l.weights) w.f64(v);
  for (double v : l.bias) w.f64(v);
}

inline void write_dense(ByteWriter& w, const DenseLayer& l) {
  w.u8(static_cast<std::uint8_t>(LayerTag::dense));
  w.u32(static_cast<std::uint32_t>(l.out_features));
  w.u32(static_cast<std::uint32_t>(l.in_features));
  for (double v : l.weights) w.f64(v);
  for (double v : l.bias) w.f64(v);
}

inline std::uint32_t extractor_layers(const FeatureExtractor& e) { return static_cast<std::uint32_t>(e.conv_layer_count()); }

inline void write_extractor(ByteWriter& w, const FeatureExtractor& e) {
  write_conv(w, LayerTag::stem, e.stem);
  for (const auto& b : e.blocks) {
    write_conv(w, LayerTag::block_conv1, b.conv1);
    write_conv(w, LayerTag::block_conv2, b.conv2);
    if (b.projection) write_conv(w, LayerTag::projection, *b.projection);
  }
}

// One decoded layer before the model is reassembled.
struct RawLayer {
  LayerTag tag{};
  std::array<std::uint32_t, 4> shape{};  // conv: out,in,k,s; dense: out,in; fusion: n
  std::vector<double> weights, bias;     // float models
  std::vector<std::int16_t> qweights, qbias;
};

inline std::vector<RawLayer> read_layers(ByteReader& r, Precision p, std::uint32_t count) {
  std::vector<RawLayer> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawLayer l;
    const std::uint8_t tag = r.u8();
    if (tag < 1 || tag > 6) throw IoError("serialize", "unknown layer type tag " + std::to_string(tag));
    l.tag = static_cast<LayerTag>(tag);
    std::size_t nw = 0, nb = 0;
    if (l.tag == LayerTag::fusion) {
      l.shape[0] = r.u32();
      nw = l.shape[0];
    } else if (l.tag == LayerTag::dense) {
      l.shape[0] = r.u32();
      l.shape[1] = r.u32();
      nw = std::size_t{l.shape[0]} * l.shape[1];
      nb = l.shape[0];
    } else {
      for (auto& s : l.shape) s = r.u32();
      if (l.shape[3] == 0 || l.shape[2] == 0) throw IoError("serialize", "conv layer with zero kernel or stride");
      nw = std::size_t{l.shape[0]} * l.shape[1] * l.shape[2];
      nb = l.shape[0];
    }
    if ((nw + nb) * (p == Precision::float64 ? 8 : 2) > r.remaining())
      throw IoError("serialize", "layer " + std::to_string(i) + " payload exceeds file size");
    if (p == Precision::float64) {
      for (std::size_t k = 0; k < nw; ++k) l.weights.push_back(r.f64());
      for (std::size_t k = 0; k < nb; ++k) l.bias.push_back(r.f64());
    } else {
      for (std::size_t k = 0; k < nw; ++k) l.qweights.push_back(r.i16());
      for (std::size_t k = 0; k < nb; ++k) l.qbias.push_back(r.i16());
    }
    layers.push_back(std::move(l));
  }
  if (r.remaining() != 0) throw IoError("serialize", "trailing bytes after the last layer");
  return layers;
}

struct Header {
  Precision precision{};
  std::uint32_t layers = 0;
};

inline Header read_header(ByteReader& r) {
  if (r.raw(kR1dcMagic.size()) != kR1dcMagic) throw IoError("serialize", "bad magic, not an R1DC model file");
  const std::uint16_t version = r.u16();
  if (version != kR1dcVersion) throw IoError("serialize", "unsupported R1DC version " + std::to_string(version));
  const std::uint8_t p = r.u8();
  if (p > 1) throw IoError("serialize", "unknown precision tag " + std::to_string(p));
  return {static_cast<Precision>(p), r.u32()};
}

inline Conv1dLayer to_conv(const RawLayer& l) {
  Conv1dLayer c(l.shape[1], l.shape[0], l.shape[2], l.shape[3]);
  c.weights = l.weights;
  c.bias = l.bias;
  return c;
}

inline DenseLayer to_dense(const RawLayer& l) {
  DenseLayer d(l.shape[1], l.shape[0]);
  d.weights = l.weights;
  d.bias = l.bias;
  return d;
}

inline QConv to_qconv(const RawLayer& l) { return {l.shape[1], l.shape[0], l.shape[2], l.shape[3], l.qweights, l.qbias}; }

/// Rebuilds the config implied by one extractor's layer sequence. The input length is not stored
/// in the file and comes from the caller.
template <typename Conv, typename Convert>
Res1DCNNConfig assemble_extractor(const std::vector<RawLayer>& layers, std::size_t& pos, Conv& stem,
                                  std::vector<std::array<Conv, 2>>& convs, std::vector<std::optional<Conv>>& projs,
                                  Convert&& convert, std::size_t input_length) {
  if (pos >= layers.size() || layers[pos].tag != LayerTag::stem) throw IoError("serialize", "expected a stem layer");
  Res1DCNNConfig cfg;
  stem = convert(layers[pos]);
  cfg.input_channels = layers[pos].shape[1];
  cfg.stem_channels = layers[pos].shape[0];
  cfg.stem_kernel = layers[pos].shape[2];
  cfg.stem_stride = layers[pos].shape[3];
  ++pos;
  while (pos < layers.size() && layers[pos].tag == LayerTag::block_conv1) {
    if (pos + 1 >= layers.size() || layers[pos + 1].tag != LayerTag::block_conv2)
      throw IoError("serialize", "block conv1 without conv2");
    convs.push_back({convert(layers[pos]), convert(layers[pos + 1])});
    cfg.blocks.push_back({layers[pos + 1].shape[0], layers[pos].shape[2], layers[pos].shape[3]});
    pos += 2;
    if (pos < layers.size() && layers[pos].tag == LayerTag::projection) {
      projs.emplace_back(convert(layers[pos]));
      ++pos;
    } else {
      projs.emplace_back(std::nullopt);
    }
  }
  cfg.input_length = input_length;
  try {
    cfg.validate();
  } catch (const InvariantError& e) {
    throw IoError("serialize", std::string("decoded topology is invalid: ") + e.what());
  }
  return cfg;
}

inline FeatureExtractor read_extractor(const std::vector<RawLayer>& layers, std::size_t& pos, std::size_t input_length) {
  FeatureExtractor e;
  std::vector<std::array<Conv1dLayer, 2>> convs;
  std::vector<std::optional<Conv1dLayer>> projs;
  e.config = assemble_extractor(layers, pos, e.stem, convs, projs, to_conv, input_length);
  for (std::size_t b = 0; b < convs.size(); ++b) e.blocks.push_back({convs[b][0], convs[b][1], projs[b]});
  if (e.blocks.size() != e.config.blocks.size()) throw IoError("serialize", "block count mismatch");
  return e;
}

inline DenseLayer read_head(const std::vector<RawLayer>& layers, std::size_t& pos) {
  if (pos >= layers.size() || layers[pos].tag != LayerTag::dense) throw IoError("serialize", "expected a dense head");
  return to_dense(layers[pos++]);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> encode_model(const StudentModel& m) {
  ByteWriter w;
  detail::write_header(w, Precision::float64, detail::extractor_layers(m.extractor) + 1);
  detail::write_extractor(w, m.extractor);
  detail::write_dense(w, m.head);
  return std::move(w).bytes();
}

/// Teacher: the three branches (ECG, EEG1, EEG2), then fusion theta, then the head.
inline std::vector<std::uint8_t> encode_model(const TeacherModel& t) {
  ByteWriter w;
  std::uint32_t n = 2;
  for (const auto& b : t.branches) n += detail::extractor_layers(b);
  detail::write_header(w, Precision::float64, n);
  for (const auto& b : t.branches) detail::write_extractor(w, b);
  w.u8(static_cast<std::uint8_t>(LayerTag::fusion));
  w.u32(static_cast<std::uint32_t>(t.fusion.theta.size()));
  for (double v : t.fusion.theta) w.f64(v);
  detail::write_dense(w, t.head);
  return std::move(w).bytes();
}

inline std::vector<std::uint8_t> encode_model(const QuantizedModel& q) {
  if (q.frac_bits != kFracBits)
    throw InvariantError("serialize", "R1DC precision tag 1 stores Q2.13 only; model uses " +
                                          std::to_string(q.frac_bits) + " fractional bits");
  ByteWriter w;
  std::uint32_t n = 2;
  for (const auto& b : q.blocks) n += b.projection ? 3 : 2;
  detail::write_header(w, Precision::q2_13, n);
  auto conv = [&](LayerTag tag, const QConv& c) {
    detail::write_conv_shape(w, tag, c.out_channels, c.in_channels, c.kernel, c.stride);
    for (auto v : c.weights) w.i16(v);
    for (auto v : c.bias) w.i16(v);
  };
  conv(LayerTag::stem, q.stem);
  for (const auto& b : q.blocks) {
    conv(LayerTag::block_conv1, b.conv1);
    conv(LayerTag::block_conv2, b.conv2);
    if (b.projection) conv(LayerTag::projection, *b.projection);
  }
  w.u8(static_cast<std::uint8_t>(LayerTag::dense));
  w.u32(static_cast<std::uint32_t>(q.head.out_features));
  w.u32(static_cast<std::uint32_t>(q.head.in_features));
  for (auto v : q.head.weights) w.i16(v);
  for (auto v : q.head.bias) w.i16(v);
  return std::move(w).bytes();
}

inline ModelKind peek_model_kind(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "serialize");
  const auto h = detail::read_header(r);
  if (h.precision == Precision::q2_13) return ModelKind::quantized;
  const auto layers = detail::read_layers(r, h.precision, h.layers);
  for (const auto& l : layers)
    if (l.tag == LayerTag::fusion) return ModelKind::teacher;
  return ModelKind::classifier;
}

inline StudentModel decode_classifier(const std::vector<std::uint8_t>& bytes,
                                     std::size_t input_length = kWindowLength) {
  ByteReader r(bytes, "serialize");
  const auto h = detail::read_header(r);
  if (h.precision != Precision::float64) throw IoError("serialize", "expected a float64 model");
  const auto layers = detail::read_layers(r, h.precision, h.layers);
  std::size_t pos = 0;
  StudentModel m;
  m.extractor = detail::read_extractor(layers, pos, input_length);
  m.head = detail::read_head(layers, pos);
  if (pos != layers.size()) throw IoError("serialize", "unexpected layers after the head (is this a teacher?)");
  if (m.head.in_features != m.extractor.feature_length()) throw IoError("serialize", "head width does not match features");
  return m;
}

/// Teachers are only written after training, so a decoded teacher counts as trained.
inline TeacherModel decode_teacher(const std::vector<std::uint8_t>& bytes,
                                  std::size_t input_length = kWindowLength) {
  ByteReader r(bytes, "serialize");
  const auto h = detail::read_header(r);
  if (h.precision != Precision::float64) throw IoError("serialize", "expected a float64 model");
  const auto layers = detail::read_layers(r, h.precision, h.layers);
  std::size_t pos = 0;
  TeacherModel t;
  for (auto& b : t.branches) b = detail::read_extractor(layers, pos, input_length);
  if (pos >= layers.size() || layers[pos].tag != LayerTag::fusion || layers[pos].weights.size() != kNumChannels)
    throw IoError("serialize", "expected a 3-way fusion layer");
  std::copy(layers[pos].weights.begin(), layers[pos].weights.end(), t.fusion.theta.begin());
  ++pos;
  t.head = detail::read_head(layers, pos);
  if (pos != layers.size()) throw IoError("serialize", "unexpected trailing layers");
  t.trained = true;
  return t;
}

inline QuantizedModel decode_quantized(const std::vector<std::uint8_t>& bytes,
                                    std::size_t input_length = kWindowLength) {
  ByteReader r(bytes, "serialize");
  const auto h = detail::read_header(r);
  if (h.precision != Precision::q2_13) throw IoError("serialize", "expected a Q2.13 model");
  const auto layers = detail::read_layers(r, h.precision, h.layers);
  std::size_t pos = 0;
  QuantizedModel q;
  q.frac_bits = kFracBits;
  std::vector<std::array<QConv, 2>> convs;
  std::vector<std::optional<QConv>> projs;
  q.config = detail::assemble_extractor(layers, pos, q.stem, convs, projs, detail::to_qconv, input_length);
  for (std::size_t b = 0; b < convs.size(); ++b) q.blocks.push_back({convs[b][0], convs[b][1], projs[b]});
  if (pos >= layers.size() || layers[pos].tag != LayerTag::dense) throw IoError("serialize", "expected a dense head");
  q.head = {layers[pos].shape[1], layers[pos].shape[0], layers[pos].qweights, layers[pos].qbias};
  if (++pos != layers.size()) throw IoError("serialize", "unexpected trailing layers");
  return q;
}

/// Bytes of parameter payload (headers excluded) for a given precision.
template <typename Model>
std::size_t parameter_payload_bytes(const Model& m, Precision p) {
  return parameter_count(m) * (p == Precision::float64 ? sizeof(double) : sizeof(std::int16_t));
}

inline std::size_t parameter_payload_bytes(const QuantizedModel& q, Precision p) {
  return q.parameter_count() * (p == Precision::float64 ? sizeof(double) : sizeof(std::int16_t));
}

template <typename Model>
void save_model(const std::string& path, const Model& m) {
  write_file_bytes(path, encode_model(m), "serialize");
}

// ---------------------------------------------------------------------------
// "SKDS" prepared-dataset files
//   magic | u16 version | 3 partitions (train, validation, test), each:
//   u64 count | per example: u8 label | u32 id length, id | u64 start | per channel: u64 n, n f64

inline constexpr std::string_view kSkdsMagic = "SKDS";
inline constexpr std::uint16_t kSkdsVersion = 1;

inline std::vector<std::uint8_t> encode_dataset(const PreparedData& d) {
  ByteWriter w;
  w.raw(kSkdsMagic);
  w.u16(kSkdsVersion);
  for (const auto* part : {&d.train, &d.validation, &d.test}) {
    w.u64(part->size());
    for (const auto& e : *part) {
      w.u8(static_cast<std::uint8_t>(e.label));
      w.u32(static_cast<std::uint32_t>(e.origin.record_id.size()));
      w.raw(e.origin.record_id);
      w.u64(e.origin.start);
      for (const auto& c : e.channels) {
        w.u64(c.size());
        for (double v : c) w.f64(v);
      }
    }
  }
  return std::move(w).bytes();
}

inline PreparedData decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "serialize");
  if (r.raw(4) != kSkdsMagic) throw IoError("serialize", "not an SKDS dataset file");
  if (const auto v = r.u16(); v != kSkdsVersion)
    throw IoError("serialize", "unsupported dataset version " + std::to_string(v));
  PreparedData d;
  for (auto* part : {&d.train, &d.validation, &d.test}) {
    const auto n = r.u64();
    // each example takes at least 38 bytes
    if (n > r.remaining() / 38) throw IoError("serialize", "dataset count exceeds file size");
    part->resize(n);
    for (auto& e : *part) {
      const auto label = r.u8();
      if (label > 1) throw IoError("serialize", "bad label byte " + std::to_string(label));
      e.label = static_cast<Label>(label);
      e.origin.record_id = r.raw(r.u32());
      e.origin.start = r.u64();
      for (auto& c : e.channels) {
        const auto len = r.u64();
        if (len > r.remaining() / sizeof(double)) throw IoError("serialize", "channel length exceeds file size");
        c.resize(len);
        for (double& v : c) v = r.f64();
      }
    }
  }
  if (r.remaining() != 0) throw IoError("serialize", "trailing bytes after dataset");
  return d;
}

}  // namespace seizurekd
