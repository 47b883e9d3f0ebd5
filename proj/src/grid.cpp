#include "pmefb/grid.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pmefb {

using nlohmann::json;

Grid::Grid(int dim, int cells_per_axis, double dx, Vec origin)
    : dim_(dim), n_(cells_per_axis), dx_(dx), origin_(std::move(origin)) {
  if (dim_ != 1 && dim_ != 2) throw InvalidArgument("grid dimension must be 1 or 2");
  if (n_ < 16) throw InvalidArgument("grid needs at least 16 cells per axis");
  if (!(dx_ > 0.0) || !std::isfinite(dx_)) throw InvalidArgument("grid spacing must be positive");
  if (origin_.size() != dim_) throw InvalidArgument("grid origin has wrong dimension");
}

Grid Grid::over(const Box& box, int cells_per_axis) {
  const int d = box.dim();
  if (box.upper.size() != d) throw InvalidArgument("box corners differ in dimension");
  for (int a = 0; a < d; ++a)
    if (!(box.extent(a) > 0.0)) throw InvalidArgument("domain must have positive volume");
  if (d == 2 && std::abs(box.extent(0) - box.extent(1)) > 1e-12 * box.extent(0))
    throw InvalidArgument("domain must have equal extents on all axes");
  return Grid(d, cells_per_axis, box.extent(0) / cells_per_axis, box.lower);
}

Box Grid::box() const {
  Box b{origin_, origin_};
  b.upper.array() += n_ * dx_;
  return b;
}

Vec Grid::center(int i, int j) const {
  if (dim_ == 1) return make_vec(origin_[0] + (i + 0.5) * dx_);
  return make_vec(origin_[0] + (i + 0.5) * dx_, origin_[1] + (j + 0.5) * dx_);
}

Vec Grid::center(Index idx) const {
  const auto [i, j] = coords(idx);
  return center(i, j);
}

std::optional<Index> Grid::locate(const Vec& x) const {
  const int i = static_cast<int>(std::floor((x[0] - origin_[0]) / dx_));
  const int j = dim_ == 1 ? 0 : static_cast<int>(std::floor((x[1] - origin_[1]) / dx_));
  if (!contains(i, j)) return std::nullopt;
  return index(i, j);
}

bool Grid::operator==(const Grid& other) const {
  return dim_ == other.dim_ && n_ == other.n_ && dx_ == other.dx_ &&
         origin_.size() == other.origin_.size() && origin_ == other.origin_;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (a != b) throw InvalidArgument(std::string(where) + ": grid mismatch");
}

Vec face_center(const Grid& g, int a, int i, int j) {
  const double dx = g.dx();
  const Vec& o = g.origin();
  if (g.dim() == 1) return make_vec(o[0] + i * dx);
  if (a == 0) return make_vec(o[0] + i * dx, o[1] + (j + 0.5) * dx);
  return make_vec(o[0] + (i + 0.5) * dx, o[1] + j * dx);
}

// ---------------------------------------------------------------------------

namespace {

void write_le_doubles(std::ostream& os, const Eigen::ArrayXd& v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (Index k = 0; k < v.size(); ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, &v[k], sizeof bits);
      bits = __builtin_bswap64(bits);
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

void read_le_doubles(std::istream& is, Eigen::ArrayXd& v) {
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw InvalidArgument("snapshot payload truncated");
  if constexpr (std::endian::native != std::endian::little) {
    for (Index k = 0; k < v.size(); ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, &v[k], sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v[k], &bits, sizeof bits);
    }
  }
}

json grid_header(const Grid& g) {
  json origin = json::array();
  for (Index a = 0; a < g.origin().size(); ++a) origin.push_back(g.origin()[a]);
  return json{{"d", g.dim()}, {"cells_per_axis", g.cells_per_axis()}, {"dx", g.dx()}, {"origin", origin}};
}

Grid grid_from_header(const json& h) {
  const int d = h.at("d").get<int>();
  const auto origin = h.at("origin").get<std::vector<double>>();
  Vec o(d);
  for (int a = 0; a < d; ++a) o[a] = origin.at(a);
  return Grid(d, h.at("cells_per_axis").get<int>(), h.at("dx").get<double>(), o);
}

}  // namespace

void write_snapshot(const std::string& path, const Field& field, const std::string& name) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open snapshot for writing: " + path);
  json header = grid_header(field.grid);
  header["time_stamp"] = field.time_stamp;
  header["name"] = name;
  os << header.dump() << '\n';
  write_le_doubles(os, field.values);
}

NamedField read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open snapshot: " + path);
  std::string line;
  std::getline(is, line);
  const json header = json::parse(line);
  NamedField out{Field(grid_from_header(header), 0.0, header.at("time_stamp").get<double>()),
                 header.at("name").get<std::string>()};
  read_le_doubles(is, out.field.values);
  return out;
}

std::string mask_to_rle_json(const Mask& mask) {
  json runs = json::array();
  bool current = false;
  Index run = 0;
  for (Index k = 0; k < mask.size(); ++k) {
    if (mask[k] != current) {
      runs.push_back(run);
      current = !current;
      run = 0;
    }
    ++run;
  }
  runs.push_back(run);
  json out = grid_header(mask.grid);
  out["runs"] = runs;
  return out.dump();
}

Mask mask_from_rle_json(const std::string& text) {
  const json in = json::parse(text);
  Mask mask(grid_from_header(in));
  Index k = 0;
  bool current = false;
  for (const auto& r : in.at("runs")) {
    const Index len = r.get<Index>();
    if (k + len > mask.size()) throw InvalidArgument("mask runs exceed grid size");
    mask.bits.segment(k, len).setConstant(current);
    k += len;
    current = !current;
  }
  if (k != mask.size()) throw InvalidArgument("mask runs do not cover the grid");
  return mask;
}

}  // namespace pmefb
