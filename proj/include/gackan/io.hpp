#ifndef GACKAN_IO_HPP
#define GACKAN_IO_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gackan/image.hpp"
#include "gackan/signal.hpp"
#include "gackan/train.hpp"

namespace gackan::io {

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg, std::size_t byte_offset = 0)
      : std::runtime_error(msg + " (byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "SPTG" tensor file: u8 version=1, u8 dtype=1 (f32), u8 layout=1 (CHW),
// u8 reserved, then u32 C,H,W little-endian and the f32 payload.
struct SptTensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;
};

void write_spt(const std::string& path, const SptTensor& t);
SptTensor read_spt(const std::string& path);

SptTensor spt_from_image(const dsp::SpectrogramImage& img);

// "GKPT" checkpoint: u32 header length, UTF-8 JSON header, f32 payload in
// tensor-directory order.
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string header_json;  // serialized JSON header
  std::vector<NamedTensor> tensors;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// Model binding. extra_header_json must be a JSON object; architecture and
// fusion state are recorded under "arch" and "fused".
Checkpoint checkpoint_from_model(train::Model& model,
                                 const std::string& extra_header_json);
nn::ArchConfig arch_from_checkpoint(const Checkpoint& ck);
bool checkpoint_is_fused(const Checkpoint& ck);
// The model must already match the checkpoint architecture and fusion state.
void load_model(train::Model& model, const Checkpoint& ck);

// Raw interleaved 32-bit little-endian float I/Q pairs.
ComplexSignal read_iq(const std::string& path, double sample_rate_hz);
void write_iq(const std::string& path, const ComplexSignal& sig);

// Binary P6 PPM, 8 bits per channel, for human viewing only.
void write_ppm(const std::string& path, const dsp::SpectrogramImage& img);

// Presentation-only SVG plots.
void write_line_plot_svg(const std::string& path,
                         const std::vector<double>& xs,
                         const std::vector<double>& ys,
                         const std::string& title, const std::string& xlabel,
                         const std::string& ylabel);
void write_heatmap_svg(const std::string& path,
                       const std::vector<std::vector<int>>& matrix,
                       const std::vector<std::string>& labels,
                       const std::string& title);

}  // namespace gackan::io

#endif  // GACKAN_IO_HPP
