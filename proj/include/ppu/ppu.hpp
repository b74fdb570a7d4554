#ifndef PPU_PPU_HPP
#define PPU_PPU_HPP

#include "ppu/baselines.hpp"
#include "ppu/config.hpp"
#include "ppu/data.hpp"
#include "ppu/errors.hpp"
#include "ppu/eval.hpp"
#include "ppu/harness.hpp"
#include "ppu/matrix.hpp"
#include "ppu/model.hpp"
#include "ppu/model_io.hpp"
#include "ppu/pipeline.hpp"
#include "ppu/probmatrix.hpp"
#include "ppu/random.hpp"
#include "ppu/refine.hpp"

#endif  // PPU_PPU_HPP
