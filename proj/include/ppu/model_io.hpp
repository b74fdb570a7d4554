#ifndef PPU_MODEL_IO_HPP
#define PPU_MODEL_IO_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "ppu/binio.hpp"
#include "ppu/errors.hpp"
#include "ppu/model.hpp"

namespace ppu {

// Checkpoint container: magic "PPUMODEL", u32 format version, u64 D, H, K,
// u64 seed, then W1, b1, W2, b2 as little-endian f64 in row-major order.
// A JSON sidecar (<path>.json) carries seed, epoch and error rates.
inline constexpr char kModelMagic[8] = {'P', 'P', 'U', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void save_model(const std::string& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out.write(kModelMagic, 8);
  binio::write_u32(out, kModelFormatVersion);
  binio::write_u64(out, p.layout.inputs);
  binio::write_u64(out, p.layout.hidden);
  binio::write_u64(out, p.layout.classes);
  binio::write_u64(out, p.seed);
  binio::write_f64s(out, p.weights);
  if (!out) throw FormatError("write failed for " + path);
}

inline ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kModelMagic)) throw FormatError(path + ": bad magic");
  const auto version = binio::read_u32(in);
  if (version != kModelFormatVersion) throw FormatError(path + ": unsupported format version " + std::to_string(version));
  ModelParams p;
  p.layout.inputs = binio::read_u64(in);
  p.layout.hidden = binio::read_u64(in);
  p.layout.classes = binio::read_u64(in);
  p.seed = binio::read_u64(in);
  if (p.layout.inputs == 0 || p.layout.hidden == 0 || p.layout.classes == 0) throw InvalidLayout(path + ": empty layout");
  p.weights.resize(p.layout.parameter_count());
  binio::read_f64s(in, p.weights);
  for (double w : p.weights) {
    if (!std::isfinite(w)) throw FormatError(path + ": non-finite weight");
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const ModelParams& p, std::size_t epoch,
                            const std::map<std::string, double>& errors) {
  save_model(path, p);
  nlohmann::json side = {{"format_version", kModelFormatVersion},
                         {"seed", p.seed},
                         {"epoch", epoch},
                         {"layout", {{"D", p.layout.inputs}, {"H", p.layout.hidden}, {"K", p.layout.classes}}},
                         {"errors", errors}};
  std::ofstream(path + ".json") << side.dump(2) << '\n';
}

}  // namespace ppu

#endif  // PPU_MODEL_IO_HPP
