#include "crom/app/rve.hpp"

#include "crom/error.hpp"
#include "crom/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace crom::app {
namespace {

struct Disc {
  double x = 0.0;
  double y = 0.0;
};

/// Minimum-image distance on a periodic n1 x n2 voxel domain.
double periodic_distance(double ax, double ay, double bx, double by, int n1, int n2) {
  double dx = std::fabs(ax - bx), dy = std::fabs(ay - by);
  dx = std::min(dx, n1 - dx);
  dy = std::min(dy, n2 - dy);
  return std::hypot(dx, dy);
}

VoxelGrid rasterize(const GeneratorSpec& spec, const std::vector<Disc>& discs, double radius) {
  const int n1 = spec.dims[0], n2 = spec.dims[1];
  std::vector<int> labels(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2),
                          spec.matrix_phase);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      for (const auto& d : discs)
        if (periodic_distance(i + 0.5, j + 0.5, d.x, d.y, n1, n2) <= radius) {
          labels[static_cast<std::size_t>(i) * static_cast<std::size_t>(n2) +
                 static_cast<std::size_t>(j)] = spec.particle_phase;
          break;
        }
  return VoxelGrid(spec.dims, spec.lengths, std::move(labels));
}

double disc_radius(const GeneratorSpec& spec, int count) {
  if (spec.radius > 0.0) return spec.radius;
  const double area = static_cast<double>(spec.dims[0]) * spec.dims[1];
  return std::sqrt(spec.volume_fraction * area / (count * std::numbers::pi));
}

}  // namespace

VoxelGrid read_rve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open RVE file " + path.string());
  std::ostringstream body;
  for (std::string line; std::getline(in, line);)
    if (line.empty() || line[0] != '#') body << line << '\n';
  std::istringstream s(body.str());
  int n1 = 0, n2 = 0;
  double l1 = 0.0, l2 = 0.0;
  if (!(s >> n1 >> n2 >> l1 >> l2)) throw InvalidInput(path.string() + ": malformed header");
  require(n1 >= 2 && n2 >= 2, path.string() + ": dimensions must be at least 2");
  require(l1 > 0.0 && l2 > 0.0, path.string() + ": lengths must be positive");
  std::vector<int> labels(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2));
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (!(s >> labels[v]))
      throw InvalidInput(path.string() + ": expected " + std::to_string(labels.size()) +
                         " labels, read " + std::to_string(v));
  std::string extra;
  if (s >> extra) throw InvalidInput(path.string() + ": trailing data after labels");
  return VoxelGrid({n1, n2}, {l1, l2}, std::move(labels));
}

void write_rve(const std::filesystem::path& path, const VoxelGrid& grid) {
  require(grid.ndim() == 2, "only two-dimensional RVEs can be written");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write RVE file " + path.string());
  out.precision(17);
  const int n2 = grid.dims()[1];
  out << grid.dims()[0] << ' ' << n2 << ' ' << grid.lengths()[0] << ' ' << grid.lengths()[1]
      << '\n';
  for (int v = 0; v < grid.size(); ++v)
    out << grid.label(v) << ((v + 1) % n2 == 0 ? '\n' : ' ');
}

VoxelGrid generate_two_particle(const GeneratorSpec& spec) {
  const int n1 = spec.dims[0], n2 = spec.dims[1];
  const double r = disc_radius(spec, 2);
  const double gap = spec.gap_fraction * n1;
  const double distance = 2.0 * r + gap;
  require(2.0 * r < n2, "two_particle: particles wider than the domain");
  require(n1 - distance - 2.0 * r > 0.0,
          "two_particle: particles overlap through the periodic boundary; lower the volume "
          "fraction or the gap");
  const double cx = 0.5 * n1, cy = 0.5 * n2;
  return rasterize(spec, {{cx - 0.5 * distance, cy}, {cx + 0.5 * distance, cy}}, r);
}

VoxelGrid generate_multi_particle(const GeneratorSpec& spec) {
  const int n1 = spec.dims[0], n2 = spec.dims[1];
  require(spec.radius > 0.0, "multi_particle: radius must be given");
  const double r = spec.radius;
  const int count = std::max(
      1, static_cast<int>(std::lround(spec.volume_fraction * n1 * n2 / (std::numbers::pi * r * r))));
  // One voxel of clearance keeps the rasterized discs apart.
  const double min_distance = 2.0 * r + 1.0;
  Rng rng(spec.seed);
  std::vector<Disc> discs;
  const long max_attempts = 100000L * count;
  for (long attempt = 0; static_cast<int>(discs.size()) < count; ++attempt) {
    require(attempt < max_attempts, "multi_particle: placement jammed; lower the volume fraction");
    const Disc d{rng.uniform() * n1, rng.uniform() * n2};
    bool ok = true;
    for (const auto& e : discs)
      if (periodic_distance(d.x, d.y, e.x, e.y, n1, n2) < min_distance) {
        ok = false;
        break;
      }
    if (ok) discs.push_back(d);
  }
  auto grid = rasterize(spec, discs, r);
  const double f = phase_fraction(grid, spec.particle_phase);
  require(std::fabs(f - spec.volume_fraction) <= 0.02,
          "multi_particle: achieved volume fraction " + std::to_string(f) +
              " misses the target by more than 0.02; adjust the radius");
  return grid;
}

VoxelGrid generate_rve(const GeneratorSpec& spec) {
  return spec.kind == GeneratorKind::two_particle ? generate_two_particle(spec)
                                                  : generate_multi_particle(spec);
}

VoxelGrid load_rve(const RveSource& source, const std::filesystem::path& base_dir) {
  if (source.file) {
    std::filesystem::path p(*source.file);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return read_rve(p);
  }
  require(source.generator.has_value(), "no RVE source configured");
  return generate_rve(*source.generator);
}

double phase_fraction(const VoxelGrid& grid, int phase) {
  return static_cast<double>(grid.count(phase)) / grid.size();
}

}  // namespace crom::app
