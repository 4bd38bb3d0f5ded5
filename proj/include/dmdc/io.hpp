// Binary file formats (HSC1 cubes, HSR1 RGB images, HSM1 measurements,
// HSK1 masks, HSP1 parameter checkpoints) and CSV helpers. All payloads are
// little-endian f32; all writes go through a temp-file-then-rename so an
// interrupted run never leaves a torn file.
#pragma once
#include <string>
#include <vector>

#include "dmdc/cube.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/optics.hpp"

namespace dmdc {

void save_cube(const HyperspectralCube& cube, const std::string& path);
HyperspectralCube load_cube(const std::string& path);

void save_rgb(const RGBImage& img, const std::string& path);
RGBImage load_rgb(const std::string& path);

void save_measurement(const CASSIMeasurement& m, const std::string& path);
CASSIMeasurement load_measurement(const std::string& path);

void save_mask(const CodedMask& m, const std::string& path);
CodedMask load_mask(const std::string& path);

// Writes `content` atomically (temp file in the same directory + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace dmdc
