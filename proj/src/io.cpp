#include "gackan/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gackan::io {

namespace {

using nlohmann::json;

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1]))
          << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2]))
          << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3]))
          << 24);
}

void put_f32(std::string& buf, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(buf, u);
}

float get_f32(const std::string& buf, std::size_t off) {
  const std::uint32_t u = get_u32(buf, off);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void write_spt(const std::string& path, const SptTensor& t) {
  const std::size_t n = static_cast<std::size_t>(t.c) * t.h * t.w;
  if (t.data.size() != n) throw FormatError("spt payload/dims mismatch");
  std::string buf;
  buf.reserve(20 + 4 * n);
  buf += "SPTG";
  buf.push_back(1);  // version
  buf.push_back(1);  // dtype f32
  buf.push_back(1);  // layout CHW
  buf.push_back(0);  // reserved
  put_u32(buf, static_cast<std::uint32_t>(t.c));
  put_u32(buf, static_cast<std::uint32_t>(t.h));
  put_u32(buf, static_cast<std::uint32_t>(t.w));
  for (float v : t.data) put_f32(buf, v);
  write_file(path, buf);
}

SptTensor read_spt(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 20) throw FormatError("spt file truncated", buf.size());
  if (buf.compare(0, 4, "SPTG") != 0) throw FormatError("bad spt magic", 0);
  if (buf[4] != 1) throw FormatError("unsupported spt version", 4);
  if (buf[5] != 1) throw FormatError("unsupported spt dtype", 5);
  if (buf[6] != 1) throw FormatError("unsupported spt layout", 6);
  SptTensor t;
  t.c = static_cast<int>(get_u32(buf, 8));
  t.h = static_cast<int>(get_u32(buf, 12));
  t.w = static_cast<int>(get_u32(buf, 16));
  const std::size_t n = static_cast<std::size_t>(t.c) * t.h * t.w;
  if (buf.size() != 20 + 4 * n) {
    throw FormatError("spt payload length mismatch", 20);
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data[i] = get_f32(buf, 20 + 4 * i);
  return t;
}

SptTensor spt_from_image(const dsp::SpectrogramImage& img) {
  SptTensor t;
  t.c = img.channels;
  t.h = img.height;
  t.w = img.width;
  t.data = img.pixels;
  return t;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  json header = json::parse(ck.header_json);
  json dir = json::array();
  std::size_t offset = 0;
  for (const auto& t : ck.tensors) {
    dir.push_back({{"name", t.name},
                   {"shape", t.shape},
                   {"offset", offset},
                   {"numel", t.data.size()}});
    offset += 4 * t.data.size();
  }
  header["tensors"] = dir;
  const std::string hs = header.dump();

  std::string buf;
  buf.reserve(8 + hs.size() + offset);
  buf += "GKPT";
  put_u32(buf, static_cast<std::uint32_t>(hs.size()));
  buf += hs;
  for (const auto& t : ck.tensors) {
    for (float v : t.data) put_f32(buf, v);
  }
  write_file(path, buf);
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 8) throw FormatError("checkpoint truncated", buf.size());
  if (buf.compare(0, 4, "GKPT") != 0) {
    throw FormatError("bad checkpoint magic", 0);
  }
  const std::size_t hlen = get_u32(buf, 4);
  if (buf.size() < 8 + hlen) throw FormatError("checkpoint header truncated", 8);
  Checkpoint ck;
  ck.header_json = buf.substr(8, hlen);
  json header = json::parse(ck.header_json, nullptr, false);
  if (header.is_discarded()) throw FormatError("checkpoint header not JSON", 8);
  const std::size_t payload = 8 + hlen;
  for (const auto& e : header.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<int>>();
    const std::size_t off = e.at("offset").get<std::size_t>();
    const std::size_t n = e.at("numel").get<std::size_t>();
    if (payload + off + 4 * n > buf.size()) {
      throw FormatError("checkpoint payload truncated", payload + off);
    }
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.data[i] = get_f32(buf, payload + off + 4 * i);
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

Checkpoint checkpoint_from_model(train::Model& model,
                                 const std::string& extra_header_json) {
  json header = extra_header_json.empty() ? json::object()
                                          : json::parse(extra_header_json);
  const nn::ArchConfig& a = model.arch();
  header["arch"] = {{"name", a.name},
                    {"in_channels", a.in_channels},
                    {"stem_channels", a.stem_channels},
                    {"block_cb", a.block_cb},
                    {"ca_reduction", a.ca_reduction},
                    {"num_classes", a.num_classes},
                    {"input_size", a.input_size},
                    {"kan_grid",
                     {{"range", a.kan_grid.range},
                      {"intervals", a.kan_grid.intervals},
                      {"order", a.kan_grid.order}}}};
  header["fused"] = model.fused();

  Checkpoint ck;
  ck.header_json = header.dump();
  for (auto& np : model.params()) {
    ck.tensors.push_back(
        {np.name, np.param->value.shape, np.param->value.data});
  }
  for (auto& [name, t] : model.state()) {
    ck.tensors.push_back({name, t->shape, t->data});
  }
  return ck;
}

nn::ArchConfig arch_from_checkpoint(const Checkpoint& ck) {
  json header = json::parse(ck.header_json);
  const json& a = header.at("arch");
  nn::ArchConfig arch;
  arch.name = a.at("name").get<std::string>();
  arch.in_channels = a.at("in_channels").get<int>();
  arch.stem_channels = a.at("stem_channels").get<int>();
  arch.block_cb = a.at("block_cb").get<std::vector<int>>();
  arch.ca_reduction = a.at("ca_reduction").get<int>();
  arch.num_classes = a.at("num_classes").get<int>();
  arch.input_size = a.at("input_size").get<int>();
  arch.kan_grid.range = a.at("kan_grid").at("range").get<double>();
  arch.kan_grid.intervals = a.at("kan_grid").at("intervals").get<int>();
  arch.kan_grid.order = a.at("kan_grid").at("order").get<int>();
  return arch;
}

bool checkpoint_is_fused(const Checkpoint& ck) {
  json header = json::parse(ck.header_json);
  return header.value("fused", false);
}

void load_model(train::Model& model, const Checkpoint& ck) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : ck.tensors) {
    if (!by_name.emplace(t.name, &t).second) {
      throw FormatError("duplicate tensor in checkpoint: " + t.name);
    }
  }
  std::size_t used = 0;
  auto assign = [&](const std::string& name, nn::Tensor<float>& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw FormatError("checkpoint missing tensor: " + name);
    }
    if (it->second->data.size() != dst.numel()) {
      throw FormatError("checkpoint tensor size mismatch: " + name);
    }
    dst.data = it->second->data;
    ++used;
  };
  for (auto& np : model.params()) assign(np.name, np.param->value);
  for (auto& [name, t] : model.state()) assign(name, *t);
  if (used != ck.tensors.size()) {
    throw FormatError("checkpoint has unused tensors");
  }
}

ComplexSignal read_iq(const std::string& path, double sample_rate_hz) {
  const std::string buf = read_file(path);
  if (buf.size() % 8 != 0) {
    throw FormatError("iq file length is not a multiple of 8",
                      buf.size() - buf.size() % 8);
  }
  ComplexSignal sig;
  sig.sample_rate_hz = sample_rate_hz;
  const std::size_t n = buf.size() / 8;
  sig.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float re = get_f32(buf, 8 * i);
    const float im = get_f32(buf, 8 * i + 4);
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw FormatError("non-finite iq sample", 8 * i);
    }
    sig.samples.emplace_back(re, im);
  }
  return sig;
}

void write_iq(const std::string& path, const ComplexSignal& sig) {
  std::string buf;
  buf.reserve(8 * sig.size());
  for (const cplx& s : sig.samples) {
    put_f32(buf, static_cast<float>(s.real()));
    put_f32(buf, static_cast<float>(s.imag()));
  }
  write_file(path, buf);
}

void write_ppm(const std::string& path, const dsp::SpectrogramImage& img) {
  std::string buf = "P6\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        buf.push_back(static_cast<char>(
            static_cast<unsigned char>(std::lround(v * 255.0f))));
      }
    }
  }
  write_file(path, buf);
}

namespace {

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof(b), "%.6g", v);
  return b;
}

}  // namespace

void write_line_plot_svg(const std::string& path,
                         const std::vector<double>& xs,
                         const std::vector<double>& ys,
                         const std::string& title, const std::string& xlabel,
                         const std::string& ylabel) {
  const int w = 640, h = 420, ml = 70, mr = 30, mt = 50, mb = 60;
  double xmin = xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end());
  double xmax = xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end());
  double ymin = ys.empty() ? 0 : *std::min_element(ys.begin(), ys.end());
  double ymax = ys.empty() ? 1 : *std::max_element(ys.begin(), ys.end());
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
    << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"28\" text-anchor=\"middle\" "
       "font-size=\"16\">"
    << title << "</text>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
    << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 15
    << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  s << "<text x=\"20\" y=\"" << h / 2
    << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
    << h / 2 << ")\">" << ylabel << "</text>\n";
  if (!xs.empty()) {
    s << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" "
         "points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      s << fmt(px(xs[i])) << "," << fmt(py(ys[i])) << " ";
    }
    s << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      s << "<circle cx=\"" << fmt(px(xs[i])) << "\" cy=\"" << fmt(py(ys[i]))
        << "\" r=\"3\" fill=\"#1f5fa8\"/>\n";
      s << "<text x=\"" << fmt(px(xs[i])) << "\" y=\"" << h - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xs[i])
        << "</text>\n";
    }
  }
  s << "<text x=\"" << ml - 8 << "\" y=\"" << py(ymin) + 4
    << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(ymin) << "</text>\n";
  s << "<text x=\"" << ml - 8 << "\" y=\"" << py(ymax) + 4
    << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(ymax) << "</text>\n";
  s << "</svg>\n";
  write_file(path, s.str());
}

void write_heatmap_svg(const std::string& path,
                       const std::vector<std::vector<int>>& matrix,
                       const std::vector<std::string>& labels,
                       const std::string& title) {
  const int k = static_cast<int>(matrix.size());
  const int cell = 52, ml = 90, mt = 70;
  const int w = ml + k * cell + 40, h = mt + k * cell + 60;
  int vmax = 1;
  for (const auto& row : matrix) {
    for (int v : row) vmax = std::max(vmax, v);
  }
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
    << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"30\" text-anchor=\"middle\" "
       "font-size=\"16\">"
    << title << "</text>\n";
  for (int p = 0; p < k; ++p) {
    for (int t = 0; t < k; ++t) {
      const double frac = static_cast<double>(
                              matrix[static_cast<std::size_t>(p)]
                                    [static_cast<std::size_t>(t)]) /
                          vmax;
      const int r = static_cast<int>(std::lround(255 * (1.0 - 0.85 * frac)));
      const int g = static_cast<int>(std::lround(255 * (1.0 - 0.55 * frac)));
      s << "<rect x=\"" << ml + t * cell << "\" y=\"" << mt + p * cell
        << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
        << r << "," << g << ",255)\" stroke=\"#ccc\"/>\n";
      s << "<text x=\"" << ml + t * cell + cell / 2 << "\" y=\""
        << mt + p * cell + cell / 2 + 4
        << "\" text-anchor=\"middle\" font-size=\"12\">"
        << matrix[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)]
        << "</text>\n";
    }
  }
  for (int i = 0; i < k && i < static_cast<int>(labels.size()); ++i) {
    s << "<text x=\"" << ml + i * cell + cell / 2 << "\" y=\"" << mt - 10
      << "\" text-anchor=\"middle\" font-size=\"11\">"
      << labels[static_cast<std::size_t>(i)] << "</text>\n";
    s << "<text x=\"" << ml - 8 << "\" y=\"" << mt + i * cell + cell / 2 + 4
      << "\" text-anchor=\"end\" font-size=\"11\">"
      << labels[static_cast<std::size_t>(i)] << "</text>\n";
  }
  s << "<text x=\"" << ml + k * cell / 2 << "\" y=\"" << mt + k * cell + 35
    << "\" text-anchor=\"middle\" font-size=\"13\">true class</text>\n";
  s << "<text x=\"30\" y=\"" << mt + k * cell / 2
    << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 30 "
    << mt + k * cell / 2 << ")\">predicted</text>\n";
  s << "</svg>\n";
  write_file(path, s.str());
}

}  // namespace gackan::io
