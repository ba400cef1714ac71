#include "skyrmem/field_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace skyrmem {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'K', 'Y', 'G', 'R', 'I', 'D', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int b = 0; b < 8; ++b) {
    bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) {
    throw ParameterError("grid dump truncated");
  }
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  }
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void write_grid_dump(std::ostream& out, const std::vector<ScalarField>& components) {
  if (components.empty()) {
    throw ParameterError("grid dump needs at least one component");
  }
  const TransverseGrid& grid = components.front().grid();
  for (const auto& c : components) {
    require_same_grid(grid, c.grid(), "write_grid_dump");
  }
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, grid.nx());
  put_u64(out, grid.ny());
  put_f64(out, grid.extent());
  put_u64(out, components.size());
  for (const auto& c : components) {
    for (const Complex& v : c.values()) {
      put_f64(out, v.real());
      put_f64(out, v.imag());
    }
  }
  if (!out) {
    throw ParameterError("failed writing grid dump");
  }
}

void write_grid_dump(const std::filesystem::path& path, const std::vector<ScalarField>& components) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open " + path.string() + " for writing");
  }
  write_grid_dump(out, components);
}

GridDump read_grid_dump(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw ParameterError("not a grid dump (bad magic)");
  }
  const auto nx = get_u64(in);
  const auto ny = get_u64(in);
  const double extent = get_f64(in);
  const auto count = get_u64(in);
  TransverseGrid grid(nx, ny, extent);
  GridDump dump{grid, {}};
  dump.components.reserve(count);
  for (std::uint64_t c = 0; c < count; ++c) {
    ScalarField field(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double re = get_f64(in);
      const double im = get_f64(in);
      field[k] = {re, im};
    }
    dump.components.push_back(std::move(field));
  }
  return dump;
}

GridDump read_grid_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParameterError("cannot open " + path.string());
  }
  return read_grid_dump(in);
}

ScalarField to_complex(const RealField& field) {
  ScalarField out(field.grid());
  for (std::size_t k = 0; k < field.size(); ++k) {
    out[k] = field[k];
  }
  return out;
}

void write_grid_csv(std::ostream& out, const std::vector<ScalarField>& components,
                    const std::vector<std::string>& names) {
  if (components.empty() || components.size() != names.size()) {
    throw ParameterError("CSV export needs one name per component");
  }
  const TransverseGrid& grid = components.front().grid();
  if (grid.size() > kMaxCsvSamples) {
    throw ParameterError("grid too large for CSV export; use the binary dump");
  }
  out << "x,y";
  for (const auto& n : names) {
    out << ",re_" << n << ",im_" << n;
  }
  out << '\n';
  out.precision(17);
  for (std::size_t j = 0; j < grid.ny(); ++j) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      out << grid.x(i) << ',' << grid.y(j);
      for (const auto& c : components) {
        out << ',' << c(i, j).real() << ',' << c(i, j).imag();
      }
      out << '\n';
    }
  }
}

void write_pgm16(const std::filesystem::path& path, const RealField& image, double full_scale) {
  if (!(full_scale > 0.0)) {
    throw ParameterError("PGM full scale must be positive");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open " + path.string() + " for writing");
  }
  const auto& grid = image.grid();
  out << "P5\n" << grid.nx() << ' ' << grid.ny() << "\n65535\n";
  // PGM rows run top to bottom, so emit y descending.
  for (std::size_t jj = grid.ny(); jj-- > 0;) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      const double v = std::clamp(image(i, jj) / full_scale, 0.0, 1.0);
      const auto level = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      const char hi = static_cast<char>(level >> 8);
      const char lo = static_cast<char>(level & 0xFF);
      out.put(hi);
      out.put(lo);
    }
  }
}

}  // namespace skyrmem
