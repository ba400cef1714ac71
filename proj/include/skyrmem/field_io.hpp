#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "skyrmem/grid.hpp"

namespace skyrmem {

// Binary grid dump, all integers and floats little-endian:
//
//   offset  size  content
//   0       8     magic "SKYGRID1"
//   8       8     uint64 nx
//   16      8     uint64 ny
//   24      8     float64 extent (half-width, units of w0)
//   32      8     uint64 component count
//   40      ...   per component, row-major (x fastest): nx*ny (re, im) float64 pairs
//
// Real fields are stored with im = 0.
struct GridDump {
  TransverseGrid grid;
  std::vector<ScalarField> components;
};

void write_grid_dump(std::ostream& out, const std::vector<ScalarField>& components);
void write_grid_dump(const std::filesystem::path& path, const std::vector<ScalarField>& components);
GridDump read_grid_dump(std::istream& in);
GridDump read_grid_dump(const std::filesystem::path& path);

ScalarField to_complex(const RealField& field);

// Columns x, y, then re_<name>, im_<name> per component. Refuses grids above
// kMaxCsvSamples.
inline constexpr std::size_t kMaxCsvSamples = 256 * 256;
void write_grid_csv(std::ostream& out, const std::vector<ScalarField>& components,
                    const std::vector<std::string>& names);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples as the format
// requires). Values are scaled so `full_scale` maps to 65535 and clipped.
void write_pgm16(const std::filesystem::path& path, const RealField& image, double full_scale);

}  // namespace skyrmem
